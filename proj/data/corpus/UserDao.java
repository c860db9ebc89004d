import java.sql.Connection;
import java.sql.DriverManager;
import java.sql.PreparedStatement;

public class UserDao {
    private final String url;

    public UserDao(String url) {
        this.url = url;
    }

    public int purgeExpired(String table) throws Exception {
        String sql = "DELETE FROM " + table + " WHERE expired = 1";
        Connection conn = DriverManager.getConnection(url);
        PreparedStatement stmt = conn.prepareStatement(sql);
        int removed = stmt.executeUpdate();
        return removed;
    }
}
