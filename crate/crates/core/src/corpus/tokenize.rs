/// Splits text into lowercase word tokens.
///
/// Rules (changing any of them changes every downstream number):
/// - tokens are maximal runs of Unicode letters and digits, so apostrophes,
///   `@`, `#` and URL punctuation all act as separators;
/// - tokens are lowercased;
/// - tokens shorter than two characters are dropped;
/// - tokens made only of digits are dropped;
/// - tokens starting with `http` are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| keep(t))
        .collect()
}

fn keep(token: &str) -> bool {
    let mut chars = token.chars();
    if chars.next().is_none() || chars.next().is_none() {
        return false;
    }
    !token.chars().all(char::is_numeric) && !token.starts_with("http")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apostrophes_split() {
        assert_eq!(tokenize("Don't SNOW today!"), ["don", "snow", "today"]);
        assert_eq!(tokenize("ain't nobody"), ["ain", "nobody"]);
    }

    #[test]
    fn empty_and_dropped() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("a I 5").is_empty());
        assert!(tokenize("  \t\n").is_empty());
        assert!(tokenize("2013 42").is_empty());
    }

    #[test]
    fn mentions_hashtags_urls() {
        assert_eq!(
            tokenize("@NYC_weather #lol check https://t.co/Ab12 now"),
            ["nyc", "weather", "lol", "check", "co", "ab12", "now"]
        );
    }

    #[test]
    fn unicode_letters_and_mixed_digits() {
        assert_eq!(tokenize("Café día 4th"), ["café", "día", "4th"]);
        assert_eq!(tokenize("ÉCOLE"), ["école"]);
    }
}
