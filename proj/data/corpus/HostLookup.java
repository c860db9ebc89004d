import java.net.InetAddress;
import java.net.URL;

public class HostLookup {
    public String addressOf(String spec) throws Exception {
        URL url = new URL(spec);
        InetAddress addr = InetAddress.getByName(url.getHost());
        return addr.getHostAddress();
    }
}
