import java.util.ArrayList;
import java.util.List;

public class PluginLoader {
    private final List<Class<?>> loaded = new ArrayList<>();

    public int register(List<String> names) throws Exception {
        for (String name : names) {
            Class<?> type = Class.forName(name);
            loaded.add(type);
        }
        return loaded.size();
    }
}
