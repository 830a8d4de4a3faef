import com.fasterxml.jackson.databind.JsonNode;
import com.fasterxml.jackson.databind.ObjectMapper;

public class JsonCodec {
    private final ObjectMapper mapper = new ObjectMapper();

    public JsonNode parse(String body) throws Exception {
        return mapper.readTree(body);
    }

    public String render(Object value) throws Exception {
        return mapper.writerWithDefaultPrettyPrinter().writeValueAsString(value);
    }
}
