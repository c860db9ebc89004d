import java.net.URI;

public class LinkBuilder {
    private final String base;

    public LinkBuilder(String base) {
        this.base = base;
    }

    public String resolve(String path) throws Exception {
        URI root = new URI(base);
        URI child = new URI(path);
        return root.resolve(child).toString();
    }
}
