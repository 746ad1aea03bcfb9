//! Fixed-width strptime subset used to validate LLM-proposed time formats.
//! Supports %Y %y %m %d %H %M %S %% plus literal characters; a parse
//! succeeds only when the whole value is consumed.

use chrono::{NaiveDate, NaiveDateTime};

fn digits(chars: &[char], pos: &mut usize, width: usize) -> Option<u32> {
    if *pos + width > chars.len() {
        return None;
    }
    let slice = &chars[*pos..*pos + width];
    if !slice.iter().all(|c| c.is_ascii_digit()) {
        return None;
    }
    *pos += width;
    slice.iter().collect::<String>().parse().ok()
}

/// Parse `value` with the format, filling missing fields with defaults
/// (month/day 1, midnight). Returns `None` unless the whole value matches.
pub fn parse(value: &str, format: &str) -> Option<NaiveDateTime> {
    let chars: Vec<char> = value.chars().collect();
    let fchars: Vec<char> = format.chars().collect();
    let mut pos = 0usize;
    let mut year: Option<i32> = None;
    let mut month = 1u32;
    let mut day = 1u32;
    let (mut hour, mut minute, mut second) = (0u32, 0u32, 0u32);

    let mut f = 0usize;
    while f < fchars.len() {
        if fchars[f] == '%' {
            let spec = *fchars.get(f + 1)?;
            f += 2;
            match spec {
                'Y' => year = Some(digits(&chars, &mut pos, 4)? as i32),
                'y' => year = Some(2000 + digits(&chars, &mut pos, 2)? as i32),
                'm' => month = digits(&chars, &mut pos, 2)?,
                'd' => day = digits(&chars, &mut pos, 2)?,
                'H' => hour = digits(&chars, &mut pos, 2)?,
                'M' => minute = digits(&chars, &mut pos, 2)?,
                'S' => second = digits(&chars, &mut pos, 2)?,
                '%' => {
                    if chars.get(pos) != Some(&'%') {
                        return None;
                    }
                    pos += 1;
                }
                _ => return None,
            }
        } else {
            if chars.get(pos) != Some(&fchars[f]) {
                return None;
            }
            pos += 1;
            f += 1;
        }
    }
    if pos != chars.len() {
        return None;
    }
    let date = NaiveDate::from_ymd_opt(year.unwrap_or(1970), month, day)?;
    date.and_hms_opt(hour, minute, second)
}

/// Fraction of values the format parses.
pub fn parse_rate(values: &[String], format: &str) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let ok = values.iter().filter(|v| parse(v, format).is_some()).count();
    ok as f64 / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_month_without_separator() {
        let t = parse("202401", "%Y%m").unwrap();
        assert_eq!(t.to_string(), "2024-01-01 00:00:00");
        assert!(parse("20240", "%Y%m").is_none());
        assert!(parse("2024-01", "%Y%m").is_none());
    }

    #[test]
    fn iso_date_and_datetime() {
        assert!(parse("2024-03-15", "%Y-%m-%d").is_some());
        assert!(parse("2024-03-15 10:30:00", "%Y-%m-%d %H:%M:%S").is_some());
        assert!(parse("15/03/2024", "%d/%m/%Y").is_some());
        assert!(parse("2024-13-01", "%Y-%m-%d").is_none());
    }

    #[test]
    fn whole_input_must_be_consumed() {
        assert!(parse("2024-03-15 extra", "%Y-%m-%d").is_none());
    }

    #[test]
    fn rate_over_samples() {
        let values: Vec<String> = vec!["202401".into(), "202402".into(), "oops".into()];
        let rate = parse_rate(&values, "%Y%m");
        assert!((rate - 2.0 / 3.0).abs() < 1e-12);
    }
}
