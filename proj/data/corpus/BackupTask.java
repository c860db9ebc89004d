import java.nio.file.Files;
import java.nio.file.Path;

public class BackupTask {
    public long copyIfPresent(Path source, Path target) throws Exception {
        long size = Files.size(source);
        if (size == 0) {
            return 0;
        }
        Files.copy(source, target);
        return size;
    }
}
