//! Text normalization shared by the toolbox, grounding and the cohort
//! generator.
//!
//! Normalization unifies full-width forms with their ASCII counterparts,
//! case-folds, and drops whitespace and punctuation. CJK characters are
//! alphanumeric and survive unchanged.

/// Delimiter between question segments inside one transcript.
pub const QUESTION_CHANGE: &str = "<|question-change|>";

fn unify_width(c: char) -> char {
    match c {
        '\u{3000}' => ' ',
        '\u{FF01}'..='\u{FF5E}' => char::from_u32(c as u32 - 0xFEE0).unwrap_or(c),
        _ => c,
    }
}

/// Normalize one token or phrase for comparison.
pub fn normalize(s: &str) -> String {
    s.chars().map(unify_width).filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

/// Split on whitespace and normalize each piece, dropping pieces that
/// normalize to nothing.
pub fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| unify_width(c).is_whitespace()).map(normalize).filter(|t| !t.is_empty()).collect()
}

/// True iff `needle` occurs in `haystack` after both are normalized.
/// An item that normalizes to the empty string never matches.
pub fn normalized_contains(haystack: &str, needle: &str) -> bool {
    let needle = normalize(needle);
    !needle.is_empty() && normalize(haystack).contains(&needle)
}

/// Split a transcript into its question segments.
pub fn segments(text: &str) -> Vec<&str> {
    text.split(QUESTION_CHANGE).map(str::trim).collect()
}

const ONES: [&str; 20] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];
const TENS: [&str; 10] = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

/// English words for 0..=999, hyphenating compound tens ("ninety-three").
pub fn number_to_words(n: u32) -> String {
    assert!(n < 1000, "number_to_words supports 0..=999");
    if n < 20 {
        return ONES[n as usize].to_string();
    }
    if n < 100 {
        let (t, o) = (n / 10, n % 10);
        return if o == 0 {
            TENS[t as usize].to_string()
        } else {
            format!("{}-{}", TENS[t as usize], ONES[o as usize])
        };
    }
    let (h, rest) = (n / 100, n % 100);
    if rest == 0 {
        format!("{} hundred", ONES[h as usize])
    } else {
        format!("{} hundred {}", ONES[h as usize], number_to_words(rest))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Word {
    Unit(u32),
    Teen(u32),
    Tens(u32),
    Hundred,
}

fn classify(word: &str) -> Option<Word> {
    if word == "hundred" {
        return Some(Word::Hundred);
    }
    if let Some(i) = ONES.iter().position(|w| *w == word) {
        return Some(if i < 10 { Word::Unit(i as u32) } else { Word::Teen(i as u32) });
    }
    TENS.iter().position(|w| !w.is_empty() && *w == word).map(|i| Word::Tens(i as u32 * 10))
}

/// Accumulates one spoken English number. `push` reports whether the word
/// extended the current number; a rejected word starts a new one.
#[derive(Default)]
struct EnglishRun {
    value: u32,
    started: bool,
    has_hundred: bool,
    has_tens: bool,
    has_unit: bool,
}

impl EnglishRun {
    fn push(&mut self, w: Word) -> bool {
        if !self.started {
            self.started = true;
            return self.apply(w);
        }
        let accepts = match w {
            Word::Hundred => !self.has_hundred && !self.has_tens && self.has_unit,
            Word::Tens(_) | Word::Teen(_) => self.has_hundred && !self.has_tens && !self.has_unit,
            Word::Unit(_) => !self.has_unit && (self.has_tens || self.has_hundred),
        };
        accepts && self.apply(w)
    }

    fn apply(&mut self, w: Word) -> bool {
        match w {
            Word::Hundred => {
                self.value = self.value.max(1) * 100;
                self.has_hundred = true;
                self.has_tens = false;
                self.has_unit = false;
            }
            Word::Tens(v) => {
                self.value += v;
                self.has_tens = true;
            }
            Word::Teen(v) => {
                self.value += v;
                self.has_tens = true;
                self.has_unit = true;
            }
            Word::Unit(v) => {
                self.value += v;
                self.has_unit = true;
            }
        }
        true
    }

    fn take(&mut self) -> Option<u32> {
        let out = self.started.then_some(self.value);
        *self = EnglishRun::default();
        out
    }
}

fn cjk_digit(c: char) -> Option<u32> {
    Some(match c {
        '零' | '〇' => 0,
        '一' => 1,
        '二' | '兩' | '两' => 2,
        '三' => 3,
        '四' => 4,
        '五' => 5,
        '六' => 6,
        '七' => 7,
        '八' => 8,
        '九' => 9,
        _ => return None,
    })
}

fn is_cjk_numeral(c: char) -> bool {
    cjk_digit(c).is_some() || c == '十' || c == '百'
}

fn parse_cjk_run(run: &[char], out: &mut Vec<u32>) {
    if !run.iter().any(|c| *c == '十' || *c == '百') {
        // Bare digit strings such as 二一八五四 are digit-by-digit recitals.
        out.extend(run.iter().filter_map(|c| cjk_digit(*c)));
        return;
    }
    let mut total = 0;
    let mut pending = 0;
    for &c in run {
        match c {
            '百' => {
                total += pending.max(1) * 100;
                pending = 0;
            }
            '十' => {
                total += pending.max(1) * 10;
                pending = 0;
            }
            _ => pending = cjk_digit(c).unwrap_or(0),
        }
    }
    out.push(total + pending);
}

/// Every number spoken in `text`, in order of appearance. Recognizes
/// ASCII digit strings, English number words (including compounds such as
/// "ninety-three" and "one hundred") and Chinese numerals.
pub fn spoken_numbers(text: &str) -> Vec<u32> {
    let text: String = text.chars().map(unify_width).collect();
    let mut out = Vec::new();
    let mut english = EnglishRun::default();
    let mut cjk: Vec<char> = Vec::new();
    let mut word = String::new();

    let flush_word = |word: &mut String, english: &mut EnglishRun, out: &mut Vec<u32>| {
        if word.is_empty() {
            return;
        }
        let w = word.to_lowercase();
        word.clear();
        if let Some(class) = classify(&w) {
            if !english.push(class) {
                out.extend(english.take());
                english.push(class);
            }
        } else {
            out.extend(english.take());
            if w.chars().all(|c| c.is_ascii_digit()) {
                if let Ok(v) = w.parse::<u32>() {
                    out.push(v);
                }
            }
        }
    };

    for c in text.chars() {
        // Cantonese contracts tens as digit + 啊/呀/亞 + digit (九啊三 = 93).
        if matches!(c, '啊' | '呀' | '亞')
            && cjk.last().is_some_and(|d| cjk_digit(*d).is_some())
            && !cjk.iter().any(|d| *d == '十' || *d == '百')
        {
            cjk.push('十');
            continue;
        }
        if is_cjk_numeral(c) {
            flush_word(&mut word, &mut english, &mut out);
            out.extend(english.take());
            cjk.push(c);
            continue;
        }
        if !cjk.is_empty() {
            parse_cjk_run(&cjk, &mut out);
            cjk.clear();
        }
        if c.is_ascii_alphanumeric() {
            word.push(c);
        } else if c == ' ' || c == '-' || c == '\t' {
            flush_word(&mut word, &mut english, &mut out);
        } else {
            // Punctuation and non-number characters end the current number.
            flush_word(&mut word, &mut english, &mut out);
            out.extend(english.take());
        }
    }
    if !cjk.is_empty() {
        parse_cjk_run(&cjk, &mut out);
    }
    flush_word(&mut word, &mut english, &mut out);
    out.extend(english.take());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_folds_case_width_and_punctuation() {
        assert_eq!(normalize("Forty-Four!"), "fortyfour");
        assert_eq!(normalize("ＡＢＣ１２"), "abc12");
        assert_eq!(normalize("  駱駝， "), "駱駝");
        assert_eq!(normalize("don't"), "dont");
    }

    #[test]
    fn tokens_split_on_whitespace() {
        assert_eq!(tokens("Xishi forty-four years old"), vec!["xishi", "fortyfour", "years", "old"]);
        assert_eq!(tokens("  , um  "), vec!["um"]);
    }

    #[test]
    fn segments_split_on_question_change() {
        let s = "transport tools lo, <|question-change|>, both measure things";
        assert_eq!(segments(s), vec!["transport tools lo,", ", both measure things"]);
    }

    #[test]
    fn english_numbers() {
        assert_eq!(spoken_numbers("ninety-three, eighty six"), vec![93, 86]);
        assert_eq!(spoken_numbers("two one eight five four"), vec![2, 1, 8, 5, 4]);
        assert_eq!(spoken_numbers("sixty, sixty-four"), vec![60, 64]);
        assert_eq!(spoken_numbers("eighty ah eighty-four"), vec![80, 84]);
        assert_eq!(spoken_numbers("one hundred minus seven"), vec![100, 7]);
        assert_eq!(spoken_numbers("hundred minus seven still have ninety-three"), vec![100, 7, 93]);
        assert_eq!(spoken_numbers("fifty fifty fifty-seven"), vec![50, 50, 57]);
        assert_eq!(spoken_numbers("93 86 79"), vec![93, 86, 79]);
        assert_eq!(spoken_numbers("three three"), vec![3, 3]);
        assert_eq!(spoken_numbers("sixty sixty"), vec![60, 60]);
        assert_eq!(spoken_numbers("one hundred twenty three"), vec![123]);
    }

    #[test]
    fn chinese_numbers() {
        assert_eq!(spoken_numbers("九十三，八十四"), vec![93, 84]);
        assert_eq!(spoken_numbers("二一八五四"), vec![2, 1, 8, 5, 4]);
        assert_eq!(spoken_numbers("一百減七"), vec![100, 7]);
        assert_eq!(spoken_numbers("十"), vec![10]);
        assert_eq!(spoken_numbers("仲有九啊三 八啊 八啊四"), vec![93, 80, 84]);
        assert_eq!(spoken_numbers("啊 馬"), Vec::<u32>::new());
    }

    #[test]
    fn words_round_trip_through_scanner() {
        for n in 0..1000 {
            assert_eq!(spoken_numbers(&number_to_words(n)), vec![n], "n = {n}");
        }
    }
}
