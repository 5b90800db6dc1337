//! Parsers for judge replies.
//!
//! Every scoring prompt ends with "repeat just the selected score again by
//! itself on a new line", so one parser serves all numeric judging: take the
//! last line that is nothing but an integer.

/// Last line consisting solely of an integer, if any.
pub fn final_standalone_integer(text: &str) -> Option<i64> {
    text.lines()
        .rev()
        .map(str::trim)
        .find(|line| !line.is_empty() && line.chars().all(|c| c.is_ascii_digit()))
        .and_then(|line| line.parse().ok())
}

/// Like [`final_standalone_integer`], bounded to an inclusive range.
pub fn final_score_in(text: &str, min: i64, max: i64) -> Option<i64> {
    final_standalone_integer(text).filter(|s| (min..=max).contains(s))
}

/// First standalone YES/NO token (case-insensitive), scanning forward.
pub fn first_yes_no(text: &str) -> Option<bool> {
    for word in text.split(|c: char| !c.is_ascii_alphabetic()) {
        if word.eq_ignore_ascii_case("yes") {
            return Some(true);
        }
        if word.eq_ignore_ascii_case("no") {
            return Some(false);
        }
    }
    None
}
