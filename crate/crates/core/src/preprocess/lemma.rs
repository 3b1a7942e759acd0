//! Rule-based lemmatizer: exception lookup first, then suffix rules.

use std::collections::HashMap;

const MIN_STEM: usize = 3;

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn is_consonant(c: u8) -> bool {
    c.is_ascii_lowercase() && !is_vowel(c)
}

/// Number of vowel groups, treating `y` after a consonant as a vowel.
fn vowel_groups(s: &[u8]) -> usize {
    let mut groups = 0;
    let mut prev_vowel = false;
    for (i, &c) in s.iter().enumerate() {
        let v = is_vowel(c) || (c == b'y' && i > 0 && !is_vowel(s[i - 1]));
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    groups
}

/// Ends consonant-vowel-consonant with the last letter not w, x or y.
fn ends_cvc(s: &[u8]) -> bool {
    let n = s.len();
    n >= 3
        && is_consonant(s[n - 3])
        && is_vowel(s[n - 2])
        && is_consonant(s[n - 1])
        && !matches!(s[n - 1], b'w' | b'x' | b'y')
}

/// Repair a stem left after removing `-ing` or `-ed`.
fn repair(stem: &str, word: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n < MIN_STEM {
        // "us" -> "use"; anything else that short was not a suffix at all
        if n == 2 && is_vowel(b[0]) && is_consonant(b[1]) {
            return format!("{stem}e");
        }
        return word.to_string();
    }
    if vowel_groups(b) == 0 {
        return word.to_string();
    }
    if b[n - 1] == b[n - 2] && is_consonant(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z') {
        return stem[..n - 1].to_string();
    }
    if stem.ends_with("at") || stem.ends_with("bl") || stem.ends_with("iz") || b[n - 1] == b'v' {
        return format!("{stem}e");
    }
    if b[n - 1] == b's' && (is_vowel(b[n - 2]) || matches!(b[n - 2], b'p' | b'n' | b'r')) && !ends_cvc(b) {
        return format!("{stem}e");
    }
    if b[n - 1] == b'c' && is_vowel(b[n - 2]) && n > 3 {
        return format!("{stem}e");
    }
    if ends_cvc(b) && vowel_groups(b) == 1 {
        return format!("{stem}e");
    }
    stem.to_string()
}

fn step(word: &str) -> String {
    if !word.bytes().all(|c| c.is_ascii_lowercase()) || word.len() <= MIN_STEM {
        return word.to_string();
    }
    let n = word.len();
    if let Some(stem) = word.strip_suffix("ies") {
        if n > 4 {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = word.strip_suffix("ied") {
        if n > 4 {
            return format!("{stem}y");
        }
    }
    for suffix in ["sses", "ches", "shes", "xes", "zes"] {
        if word.ends_with(suffix) {
            return word[..n - 2].to_string();
        }
    }
    if word.ends_with('s') && !["ss", "us", "is"].iter().any(|s| word.ends_with(s)) {
        return word[..n - 1].to_string();
    }
    if word.ends_with("eed") {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ing") {
        return repair(stem, word);
    }
    if let Some(stem) = word.strip_suffix("ed") {
        return repair(stem, word);
    }
    word.to_string()
}

/// Reduce `word` to its lemma. Rules are applied until nothing changes, so
/// the result is a fixpoint: `lemmatize(lemmatize(w)) == lemmatize(w)`.
pub fn lemmatize(word: &str, exceptions: &HashMap<String, String>) -> String {
    let mut current = word.to_string();
    for _ in 0..8 {
        if let Some(lemma) = exceptions.get(&current) {
            return lemma.clone();
        }
        let next = step(&current);
        if next == current || next.len() < MIN_STEM {
            break;
        }
        current = next;
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lem(w: &str) -> String {
        lemmatize(w, &super::super::default_lemma_exceptions())
    }

    #[test]
    fn suffix_rules() {
        for (word, lemma) in [
            ("using", "use"),
            ("used", "use"),
            ("taking", "take"),
            ("hoping", "hope"),
            ("hopping", "hop"),
            ("nodding", "nod"),
            ("selling", "sell"),
            ("shooting", "shoot"),
            ("sleeping", "sleep"),
            ("opening", "open"),
            ("chasing", "chase"),
            ("shaking", "shake"),
            ("caused", "cause"),
            ("dosed", "dose"),
            ("lived", "live"),
            ("created", "create"),
            ("realized", "realize"),
            ("posted", "post"),
            ("pills", "pill"),
            ("doses", "dose"),
            ("boxes", "box"),
            ("watches", "watch"),
            ("dresses", "dress"),
            ("pharmacies", "pharmacy"),
            ("tried", "try"),
            ("opioids", "opioid"),
            ("virus", "virus"),
            ("analysis", "analysis"),
            ("sing", "sing"),
            ("80mg", "80mg"),
            ("things", "thing"),
            ("feelings", "feeling"),
        ] {
            assert_eq!(lem(word), lemma, "{word}");
        }
    }

    #[test]
    fn exceptions_win() {
        assert_eq!(lem("took"), "take");
        assert_eq!(lem("died"), "die");
        assert_eq!(lem("anything"), "anything");
        assert_eq!(lem("increased"), "increase");
    }

    #[test]
    fn exception_targets_are_fixpoints() {
        let ex = super::super::default_lemma_exceptions();
        for lemma in ex.values() {
            assert_eq!(&lemmatize(lemma, &ex), lemma);
        }
    }

    #[test]
    fn fixpoint() {
        for w in ["meetings", "hopping", "relapsed", "supplies", "pills", "caring", "bussing"] {
            let once = lem(w);
            assert_eq!(lem(&once), once, "{w}");
        }
    }
}
