import java.io.FileInputStream;
import java.io.IOException;
import java.util.Properties;

public class Props {
    public Properties load(String path) throws IOException {
        Properties props = new Properties();
        try (FileInputStream in = new FileInputStream(path)) {
            props.load(in);
        }
        return props;
    }

    public int port(Properties props) {
        return Integer.parseInt(props.getProperty("port", "8080"));
    }
}
