import java.time.LocalDate;

public class DateFilter {
    private final LocalDate cutoff;

    public DateFilter(LocalDate cutoff) {
        this.cutoff = cutoff;
    }

    public boolean isRecent(String text) {
        LocalDate day = LocalDate.parse(text);
        return day.isAfter(cutoff);
    }
}
