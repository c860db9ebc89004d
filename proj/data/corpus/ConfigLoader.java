import java.io.FileReader;
import java.util.Properties;

public class ConfigLoader {
    private final String defaults;

    public ConfigLoader(String defaults) {
        this.defaults = defaults;
    }

    public Properties load(String path) throws Exception {
        Properties props = new Properties();
        props.setProperty("profile", defaults);
        props.load(new FileReader(path));
        return props;
    }
}
