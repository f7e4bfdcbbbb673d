//! Symbol codes: finite windows over the label alphabet with constant tails,
//! standing in for bi-infinite sequences.

use serde::{Deserialize, Serialize};

use super::SymbolicError;

/// A code ξ: total over all integer indices. Indices inside the stored
/// window return stored symbols; indices outside return the tail symbol for
/// that side. Symbols are field indices into the owning `GuidingFieldSet`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Code {
    base_index: i64,
    symbols: Vec<usize>,
    left_tail: usize,
    right_tail: usize,
}

impl Code {
    pub fn new(
        base_index: i64,
        symbols: Vec<usize>,
        left_tail: usize,
        right_tail: usize,
    ) -> Result<Self, SymbolicError> {
        if symbols.is_empty() {
            return Err(SymbolicError::EmptyWindow);
        }
        Ok(Self {
            base_index,
            symbols,
            left_tail,
            right_tail,
        })
    }

    /// The constant code (c)^∞.
    pub fn constant(symbol: usize) -> Self {
        Self {
            base_index: 0,
            symbols: vec![symbol],
            left_tail: symbol,
            right_tail: symbol,
        }
    }

    /// First stored index.
    pub fn base_index(&self) -> i64 {
        self.base_index
    }

    /// One past the last stored index.
    pub fn end_index(&self) -> i64 {
        self.base_index + self.symbols.len() as i64
    }

    pub fn window(&self) -> &[usize] {
        &self.symbols
    }

    pub fn left_tail(&self) -> usize {
        self.left_tail
    }

    pub fn right_tail(&self) -> usize {
        self.right_tail
    }

    /// Largest symbol id appearing anywhere in the code.
    pub fn max_symbol(&self) -> usize {
        self.symbols
            .iter()
            .copied()
            .chain([self.left_tail, self.right_tail])
            .max()
            .expect("window is non-empty")
    }

    /// Total lookup: stored symbol inside the window, tail outside.
    pub fn lookup(&self, index: i64) -> usize {
        if index < self.base_index {
            self.left_tail
        } else if index >= self.end_index() {
            self.right_tail
        } else {
            self.symbols[(index - self.base_index) as usize]
        }
    }

    /// New code equal to `self` at every index ≤ `at`, with `symbols`
    /// written at `at+1, …, at+len` and `right_tail` beyond.
    pub fn splice_after(&self, at: i64, symbols: &[usize], right_tail: usize) -> Code {
        let new_base = self.base_index.min(at);
        let mut window: Vec<usize> = (new_base..=at).map(|i| self.lookup(i)).collect();
        window.extend_from_slice(symbols);
        Code {
            base_index: new_base,
            symbols: window,
            left_tail: self.left_tail,
            right_tail,
        }
    }

    /// Do the two codes agree on every index with |index| ≤ radius?
    pub fn agrees_within(&self, other: &Code, radius: i64) -> bool {
        (-radius..=radius).all(|i| self.lookup(i) == other.lookup(i))
    }

    /// Render as e.g. `(c1)^inf | c1 c3 c3 c2 | (c2)^inf @ 0`.
    pub fn display(&self, labels: &[&str]) -> String {
        let name = |s: usize| labels.get(s).copied().unwrap_or("?");
        let middle: Vec<&str> = self.symbols.iter().map(|&s| name(s)).collect();
        format!(
            "({})^inf | {} | ({})^inf @ {}",
            name(self.left_tail),
            middle.join(" "),
            name(self.right_tail),
            self.base_index
        )
    }

    /// Parse the `display` format back into a code.
    pub fn parse(text: &str, labels: &[&str]) -> Result<Code, SymbolicError> {
        let find = |token: &str| -> Result<usize, SymbolicError> {
            labels
                .iter()
                .position(|l| *l == token)
                .ok_or_else(|| SymbolicError::CodeParse(format!("unknown label `{token}`")))
        };
        let (body, base) = match text.rsplit_once('@') {
            Some((body, base)) => {
                let base: i64 = base.trim().parse().map_err(|_| {
                    SymbolicError::CodeParse(format!("invalid base index `{}`", base.trim()))
                })?;
                (body, base)
            }
            None => (text, 0),
        };
        let parts: Vec<&str> = body.split('|').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(SymbolicError::CodeParse(
                "expected `(tail)^inf | window | (tail)^inf`".into(),
            ));
        }
        let tail = |part: &str| -> Result<usize, SymbolicError> {
            let inner = part
                .strip_suffix("^inf")
                .and_then(|p| p.trim().strip_prefix('('))
                .and_then(|p| p.strip_suffix(')'))
                .ok_or_else(|| SymbolicError::CodeParse(format!("malformed tail `{part}`")))?;
            find(inner.trim())
        };
        let left = tail(parts[0])?;
        let right = tail(parts[2])?;
        let symbols = parts[1]
            .split_whitespace()
            .map(find)
            .collect::<Result<Vec<_>, _>>()?;
        Code::new(base, symbols, left, right)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_total() {
        let code = Code::new(-2, vec![0, 1, 2, 1], 0, 2).unwrap();
        assert_eq!(code.lookup(-100), 0);
        assert_eq!(code.lookup(-2), 0);
        assert_eq!(code.lookup(-1), 1);
        assert_eq!(code.lookup(1), 1);
        assert_eq!(code.lookup(2), 2);
        assert_eq!(code.lookup(1_000_000), 2);
    }

    #[test]
    fn empty_window_rejected() {
        assert!(matches!(
            Code::new(0, vec![], 0, 0),
            Err(SymbolicError::EmptyWindow)
        ));
    }

    #[test]
    fn splice_preserves_past_and_rewrites_future() {
        let code = Code::constant(0);
        let spliced = code.splice_after(3, &[1, 1, 2], 2);
        for i in -5..=3 {
            assert_eq!(spliced.lookup(i), 0, "index {i} must be preserved");
        }
        assert_eq!(spliced.lookup(4), 1);
        assert_eq!(spliced.lookup(5), 1);
        assert_eq!(spliced.lookup(6), 2);
        assert_eq!(spliced.lookup(7), 2); // new right tail
        assert_eq!(spliced.lookup(100), 2);
    }

    #[test]
    fn splice_before_window_discards_overwritten_symbols() {
        let code = Code::new(0, vec![1, 1, 1], 0, 1).unwrap();
        let spliced = code.splice_after(-3, &[2], 2);
        assert_eq!(spliced.lookup(-3), 0);
        assert_eq!(spliced.lookup(-2), 2);
        assert_eq!(spliced.lookup(0), 2); // old window overwritten by tail
    }

    #[test]
    fn splice_with_no_symbols_only_moves_the_tail() {
        let code = Code::constant(0);
        let spliced = code.splice_after(0, &[], 1);
        assert_eq!(spliced.lookup(0), 0);
        assert_eq!(spliced.lookup(1), 1);
    }

    #[test]
    fn display_and_parse_round_trip() {
        let labels = ["c1", "c2", "c3"];
        let code = Code::new(0, vec![0, 2, 2, 1], 0, 1).unwrap();
        let text = code.display(&labels);
        assert_eq!(text, "(c1)^inf | c1 c3 c3 c2 | (c2)^inf @ 0");
        let parsed = Code::parse(&text, &labels).unwrap();
        assert_eq!(parsed, code);

        let negative_base = Code::new(-4, vec![1, 0], 2, 0).unwrap();
        let round = Code::parse(&negative_base.display(&labels), &labels).unwrap();
        assert_eq!(round, negative_base);
    }

    #[test]
    fn parse_rejects_unknown_labels_and_bad_shape() {
        let labels = ["c1", "c2"];
        assert!(Code::parse("(c9)^inf | c1 | (c1)^inf @ 0", &labels).is_err());
        assert!(Code::parse("c1 c2", &labels).is_err());
        assert!(Code::parse("(c1)^inf | c1 | (c2)^inf @ x", &labels).is_err());
    }

    #[test]
    fn agreement_radius() {
        let a = Code::new(-3, vec![0, 1, 0, 1, 0, 1, 0], 0, 0).unwrap();
        let mut w = a.window().to_vec();
        w[0] = 1; // index -3
        let b = Code::new(-3, w, 0, 0).unwrap();
        assert!(a.agrees_within(&b, 2));
        assert!(!a.agrees_within(&b, 3));
    }
}
