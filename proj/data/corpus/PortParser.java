public class PortParser {
    private final int fallback;

    public PortParser(int fallback) {
        this.fallback = fallback;
    }

    public int parse(String value) {
        int port = fallback;
        port = Integer.parseInt(value.trim());
        if (port < 0 || port > 65535) {
            port = fallback;
        }
        return port;
    }
}
