use serde::{Deserialize, Serialize};

/// One sentence of a document. Offsets count Unicode scalar values into the
/// document body; `text` is exactly `body[char_start..char_end]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

/// Sentence boundary detection. Implementations must return ordered,
/// non-overlapping spans that cover every non-whitespace character.
pub trait Segmenter: Send + Sync {
    fn segment(&self, text: &str) -> Vec<Sentence>;
}

/// Abbreviations that never end a sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "Fig.", "Figs.", "fig.", "figs.", "Eq.", "Eqs.", "eq.", "Ref.", "Refs.", "ref.", "Tab.", "Sec.", "Ch.", "Vol.",
    "No.", "no.", "pp.", "p.", "vs.", "e.g.", "i.e.", "cf.", "et al.", "approx.", "ca.", "Dr.", "Prof.", "Mr.", "Ms.",
    "Mrs.", "St.", "Inc.", "Co.", "Ltd.", "Corp.", "Jan.", "Feb.", "Mar.", "Apr.", "Aug.", "Sept.", "Oct.", "Nov.",
    "Dec.",
];

/// Rule-based splitter: a sentence ends after `.`, `?` or `!` (plus any
/// closing quotes) when whitespace follows and the next word starts with an
/// uppercase letter, a digit, or an opening bracket/quote. Blank lines always
/// end a sentence. No split happens inside brackets or after a guarded
/// abbreviation.
#[derive(Debug, Clone)]
pub struct RuleSegmenter {
    abbreviations: Vec<Vec<char>>,
}

impl Default for RuleSegmenter {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

const CLOSERS: &[char] = &['"', '\'', '\u{201d}', '\u{2019}'];
const OPENERS: &[char] = &['(', '[', '{', '"', '\'', '\u{201c}', '\u{2018}'];

impl RuleSegmenter {
    pub fn with_abbreviations<'a>(list: impl IntoIterator<Item = &'a str>) -> Self {
        Self { abbreviations: list.into_iter().map(|a| a.chars().collect()).collect() }
    }

    /// True when `chars[..=dot]` ends with a guarded abbreviation that starts
    /// the text or follows whitespace/an opening bracket.
    fn guarded(&self, chars: &[char], dot: usize) -> bool {
        self.abbreviations.iter().any(|abbr| {
            let n = abbr.len();
            if n == 0 || n > dot + 1 {
                return false;
            }
            let start = dot + 1 - n;
            chars[start..=dot] == abbr[..]
                && (start == 0 || chars[start - 1].is_whitespace() || OPENERS.contains(&chars[start - 1]))
        })
    }

    /// Scalar positions where sentences end (exclusive).
    fn boundaries(&self, chars: &[char]) -> Vec<usize> {
        let mut cuts = Vec::new();
        let mut depth = 0usize;
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match c {
                '(' | '[' | '{' => depth += 1,
                ')' | ']' | '}' => depth = depth.saturating_sub(1),
                '\n' => {
                    // blank line: paragraph break
                    let mut j = i + 1;
                    while j < chars.len() && chars[j] != '\n' && chars[j].is_whitespace() {
                        j += 1;
                    }
                    if j < chars.len() && chars[j] == '\n' {
                        cuts.push(i);
                        depth = 0;
                    }
                }
                '.' | '?' | '!' if depth == 0 => {
                    let mut end = i + 1;
                    while end < chars.len() && CLOSERS.contains(&chars[end]) {
                        end += 1;
                    }
                    let mut next = end;
                    while next < chars.len() && chars[next].is_whitespace() {
                        next += 1;
                    }
                    let has_gap = next > end;
                    let starts_sentence = next < chars.len()
                        && (chars[next].is_uppercase()
                            || chars[next].is_ascii_digit()
                            || OPENERS.contains(&chars[next]));
                    if has_gap && starts_sentence && !(c == '.' && self.guarded(chars, i)) {
                        cuts.push(end);
                        i = end;
                        continue;
                    }
                }
                _ => {}
            }
            i += 1;
        }
        cuts
    }
}

impl Segmenter for RuleSegmenter {
    fn segment(&self, text: &str) -> Vec<Sentence> {
        let chars: Vec<char> = text.chars().collect();
        let mut cuts = self.boundaries(&chars);
        cuts.push(chars.len());
        let mut out = Vec::new();
        let mut start = 0;
        for cut in cuts {
            let mut s = start;
            while s < cut && chars[s].is_whitespace() {
                s += 1;
            }
            let mut e = cut;
            while e > s && chars[e - 1].is_whitespace() {
                e -= 1;
            }
            if e > s {
                out.push(Sentence { index: out.len(), char_start: s, char_end: e, text: chars[s..e].iter().collect() });
            }
            start = cut;
        }
        out
    }
}

/// Segments with the default rule set.
pub fn segment(text: &str) -> Vec<Sentence> {
    RuleSegmenter::default().segment(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &[Sentence]) -> Vec<&str> {
        s.iter().map(|x| x.text.as_str()).collect()
    }

    #[test]
    fn two_sentences() {
        assert_eq!(texts(&segment("First. Second.")), vec!["First.", "Second."]);
    }

    #[test]
    fn guarded_abbreviation() {
        let seg = RuleSegmenter::with_abbreviations(["A."]);
        assert_eq!(seg.segment("A. B.").len(), 1);
        assert_eq!(segment("A. B.").len(), 2);
    }

    #[test]
    fn unit_expression_and_percent() {
        let s = segment("capacitance of 537 F/g (at 2 A g⁻¹). Retention 93%.");
        assert_eq!(texts(&s), vec!["capacitance of 537 F/g (at 2 A g⁻¹).", "Retention 93%."]);
    }

    #[test]
    fn no_split_in_decimals_or_brackets() {
        let s = segment("A gap of 1.8 eV (see Ref. 4. Also Fig. 2) was found. Next one.");
        assert_eq!(texts(&s), vec!["A gap of 1.8 eV (see Ref. 4. Also Fig. 2) was found.", "Next one."]);
    }

    #[test]
    fn common_abbreviations() {
        let s = segment("As shown in Fig. 3 the gap closes. Smith et al. Reported it.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].text, "As shown in Fig. 3 the gap closes.");
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(segment("pH 7. then stirred.").len(), 1);
    }

    #[test]
    fn question_and_exclamation() {
        assert_eq!(segment("Why? Because! Yes.").len(), 3);
    }

    #[test]
    fn closing_quote_stays_with_sentence() {
        let s = segment("He said \"stop.\" Then left.");
        assert_eq!(texts(&s), vec!["He said \"stop.\"", "Then left."]);
    }

    #[test]
    fn paragraph_break_splits() {
        let s = segment("2.1 Methods\n\nSamples were grown");
        assert_eq!(texts(&s), vec!["2.1 Methods", "Samples were grown"]);
    }

    #[test]
    fn offsets_are_scalar_positions() {
        let body = "Ωmega phase. Β phase.";
        let s = segment(body);
        let chars: Vec<char> = body.chars().collect();
        for sent in &s {
            let slice: String = chars[sent.char_start..sent.char_end].iter().collect();
            assert_eq!(slice, sent.text);
        }
        assert_eq!(s[1].char_start, 13);
    }

    #[test]
    fn empty_and_blank() {
        assert!(segment("").is_empty());
        assert!(segment(" \n\t ").is_empty());
    }
}
