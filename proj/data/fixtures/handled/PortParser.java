public class PortParser {
    private final int fallback;

    public PortParser(int fallback) {
        this.fallback = fallback;
    }

    public int parse(String value) {
        int port = fallback;
        try {
            port = Integer.parseInt(value.trim());
        } catch (NumberFormatException e) {
            System.err.println("Invalid port '" + value + "', using " + fallback);
        }
        if (port < 0 || port > 65535) {
            port = fallback;
        }
        return port;
    }
}
