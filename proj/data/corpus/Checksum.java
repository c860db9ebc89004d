import java.nio.charset.StandardCharsets;
import java.security.MessageDigest;

public class Checksum {
    public byte[] sha256(String text) throws Exception {
        byte[] data = text.getBytes(StandardCharsets.UTF_8);
        MessageDigest md = MessageDigest.getInstance("SHA-256");
        md.update(data);
        return md.digest();
    }
}
