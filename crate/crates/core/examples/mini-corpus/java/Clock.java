import java.time.Instant;
import java.time.LocalDate;
import java.time.format.DateTimeFormatter;

public class Clock {
    public String today() {
        return LocalDate.now().format(DateTimeFormatter.ISO_LOCAL_DATE);
    }

    public long epochMillis() {
        return Instant.now().toEpochMilli();
    }

    public LocalDate parse(String s) {
        return LocalDate.parse(s, DateTimeFormatter.ofPattern("yyyy-MM-dd"));
    }
}
