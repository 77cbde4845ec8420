//! Fixed 365-day year at 3-minute resolution and the month-to-season map.

pub const STEP_MINUTES: usize = 3;
pub const STEPS_PER_DAY: usize = 24 * 60 / STEP_MINUTES; // 480
pub const DAYS_PER_YEAR: usize = 365;
pub const BASE_YEAR: usize = 2014;

const MONTH_DAYS: [usize; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Season {
    Spring,
    Summer,
    Fall,
    Winter,
}

pub const SEASONS: [Season; 4] = [Season::Spring, Season::Summer, Season::Fall, Season::Winter];

impl Season {
    pub fn index(self) -> usize {
        match self {
            Season::Spring => 0,
            Season::Summer => 1,
            Season::Fall => 2,
            Season::Winter => 3,
        }
    }

    pub fn from_index(i: usize) -> Season {
        SEASONS[i]
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut z = [0.0; 4];
        z[self.index()] = 1.0;
        z
    }

    pub fn name(self) -> &'static str {
        match self {
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Fall => "fall",
            Season::Winter => "winter",
        }
    }
}

/// Month-to-season division: spring = {2,3,4}, summer = {5,6,7},
/// fall = {8,9,10}, winter = {11,12,1}.
#[derive(Debug, Clone, Copy, Default)]
pub struct SeasonCalendar;

impl SeasonCalendar {
    /// `month` is 1-based (1 = January).
    pub fn season_of_month(month: usize) -> Season {
        match month {
            2..=4 => Season::Spring,
            5..=7 => Season::Summer,
            8..=10 => Season::Fall,
            11 | 12 | 1 => Season::Winter,
            _ => panic!("month {month} out of range 1..=12"),
        }
    }
}

/// Position in the profile data: day of year (0-based) and step within the
/// day (0..480).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cursor {
    pub day: usize,
    pub step: usize,
}

impl Cursor {
    pub fn new(day: usize, step: usize) -> Cursor {
        assert!(step < STEPS_PER_DAY, "step {step} out of day range");
        Cursor { day, step }
    }

    pub fn global_step(&self) -> usize {
        self.day * STEPS_PER_DAY + self.step
    }

    pub fn from_global_step(g: usize) -> Cursor {
        Cursor { day: g / STEPS_PER_DAY, step: g % STEPS_PER_DAY }
    }

    /// 1-based month of this cursor's day (day indices wrap the 365-day year).
    pub fn month(&self) -> usize {
        month_of_day(self.day % DAYS_PER_YEAR)
    }

    pub fn season(&self) -> Season {
        SeasonCalendar::season_of_month(self.month())
    }

    /// Next step, wrapping around the year end.
    pub fn advanced(&self, horizon_days: usize) -> Cursor {
        let g = (self.global_step() + 1) % (horizon_days * STEPS_PER_DAY);
        Cursor::from_global_step(g)
    }

    pub fn hour(&self) -> f64 {
        self.step as f64 * STEP_MINUTES as f64 / 60.0
    }
}

/// One-hot season label of a cursor (the env's `z`).
pub fn season_of(cursor: Cursor) -> [f64; 4] {
    cursor.season().one_hot()
}

/// 1-based month containing 0-based `day_of_year`.
pub fn month_of_day(day_of_year: usize) -> usize {
    assert!(day_of_year < DAYS_PER_YEAR, "day {day_of_year} out of year");
    let mut rem = day_of_year;
    for (m, &len) in MONTH_DAYS.iter().enumerate() {
        if rem < len {
            return m + 1;
        }
        rem -= len;
    }
    unreachable!()
}

/// 0-based day range `[start, end)` of a 1-based month.
pub fn days_of_month(month: usize) -> (usize, usize) {
    assert!((1..=12).contains(&month), "month {month}");
    let start: usize = MONTH_DAYS[..month - 1].iter().sum();
    (start, start + MONTH_DAYS[month - 1])
}

/// ISO-8601 timestamp of a global step in the fixed base year.
pub fn timestamp_of(global_step: usize) -> String {
    let day = (global_step / STEPS_PER_DAY) % DAYS_PER_YEAR;
    let step = global_step % STEPS_PER_DAY;
    let month = month_of_day(day);
    let (start, _) = days_of_month(month);
    let dom = day - start + 1;
    let minutes = step * STEP_MINUTES;
    format!(
        "{BASE_YEAR}-{month:02}-{dom:02}T{:02}:{:02}:00",
        minutes / 60,
        minutes % 60
    )
}

/// Parses a timestamp written by [`timestamp_of`] back to a global step.
pub fn parse_timestamp(ts: &str) -> Option<usize> {
    let bytes = ts.as_bytes();
    if bytes.len() != 19 || bytes[4] != b'-' || bytes[7] != b'-' || bytes[10] != b'T' {
        return None;
    }
    let year: usize = ts[0..4].parse().ok()?;
    if year != BASE_YEAR {
        return None;
    }
    let month: usize = ts[5..7].parse().ok()?;
    let dom: usize = ts[8..10].parse().ok()?;
    let hh: usize = ts[11..13].parse().ok()?;
    let mm: usize = ts[14..16].parse().ok()?;
    if !(1..=12).contains(&month) {
        return None;
    }
    let (start, end) = days_of_month(month);
    let day = start + dom.checked_sub(1)?;
    if day >= end {
        return None;
    }
    let minutes = hh * 60 + mm;
    if minutes % STEP_MINUTES != 0 {
        return None;
    }
    Some(day * STEPS_PER_DAY + minutes / STEP_MINUTES)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_two_is_spring_month_one_is_winter() {
        assert_eq!(SeasonCalendar::season_of_month(2), Season::Spring);
        assert_eq!(SeasonCalendar::season_of_month(1), Season::Winter);
        assert_eq!(SeasonCalendar::season_of_month(12), Season::Winter);
        assert_eq!(SeasonCalendar::season_of_month(7), Season::Summer);
        assert_eq!(SeasonCalendar::season_of_month(10), Season::Fall);
    }

    #[test]
    fn months_partition_into_four_seasons_of_three() {
        let mut counts = [0usize; 4];
        for m in 1..=12 {
            counts[SeasonCalendar::season_of_month(m).index()] += 1;
        }
        assert_eq!(counts, [3, 3, 3, 3]);
    }

    #[test]
    fn year_covers_all_seasons() {
        let mut seen = [false; 4];
        for day in 0..DAYS_PER_YEAR {
            let c = Cursor::new(day, 0);
            seen[c.season().index()] = true;
        }
        assert_eq!(seen, [true; 4]);
    }

    #[test]
    fn timestamps_round_trip() {
        for &g in &[0usize, 479, 480, 31 * 480, 364 * 480 + 479, 100_000] {
            let ts = timestamp_of(g);
            assert_eq!(parse_timestamp(&ts), Some(g), "timestamp {ts}");
        }
        assert_eq!(timestamp_of(0), "2014-01-01T00:00:00");
        assert_eq!(timestamp_of(31 * 480), "2014-02-01T00:00:00");
    }

    #[test]
    fn cursor_wraps_year() {
        let c = Cursor::new(364, 479);
        assert_eq!(c.advanced(365), Cursor::new(0, 0));
    }

    #[test]
    fn one_hot_layout() {
        assert_eq!(season_of(Cursor::new(40, 0)), [1.0, 0.0, 0.0, 0.0]); // Feb 10
        assert_eq!(season_of(Cursor::new(0, 0)), [0.0, 0.0, 0.0, 1.0]); // Jan 1
    }
}
