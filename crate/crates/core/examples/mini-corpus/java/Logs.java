import org.slf4j.Logger;
import org.slf4j.LoggerFactory;

public class Logs {
    private static final Logger LOG = LoggerFactory.getLogger(Logs.class);

    public void started(String name, int port) {
        LOG.info("{} listening on {}", name, port);
    }

    public void failed(Exception e) {
        LOG.error("request failed", e);
    }
}
