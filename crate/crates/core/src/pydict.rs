//! Parser for flat string-to-string mapping literals as models write them:
//! JSON objects or Python dicts with single- or double-quoted strings and an
//! optional trailing comma.

use std::iter::Peekable;
use std::str::CharIndices;

pub(crate) fn parse_string_map(src: &str) -> Result<Vec<(String, String)>, String> {
    let mut p = Parser {
        src,
        chars: src.char_indices().peekable(),
    };
    p.skip_ws();
    p.expect('{')?;
    let mut entries = Vec::new();
    loop {
        p.skip_ws();
        if p.eat('}') {
            break;
        }
        let key = p.string()?;
        p.skip_ws();
        p.expect(':')?;
        p.skip_ws();
        let value = p.string()?;
        entries.push((key, value));
        p.skip_ws();
        if p.eat(',') {
            continue;
        }
        p.skip_ws();
        p.expect('}')?;
        break;
    }
    Ok(entries)
}

struct Parser<'a> {
    src: &'a str,
    chars: Peekable<CharIndices<'a>>,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.chars.next_if(|(_, c)| c.is_whitespace()).is_some() {}
    }

    fn eat(&mut self, want: char) -> bool {
        self.chars.next_if(|&(_, c)| c == want).is_some()
    }

    fn position(&mut self) -> usize {
        self.chars.peek().map_or(self.src.len(), |&(i, _)| i)
    }

    fn expect(&mut self, want: char) -> Result<(), String> {
        let at = self.position();
        if self.eat(want) {
            Ok(())
        } else {
            Err(format!("expected {want:?} at byte {at}"))
        }
    }

    fn string(&mut self) -> Result<String, String> {
        let at = self.position();
        let quote = match self.chars.next() {
            Some((_, q @ ('"' | '\''))) => q,
            _ => return Err(format!("expected a quoted string at byte {at}")),
        };
        let mut out = String::new();
        loop {
            let Some((_, c)) = self.chars.next() else {
                return Err(format!("unterminated string starting at byte {at}"));
            };
            match c {
                c if c == quote => return Ok(out),
                '\\' => {
                    let Some((_, esc)) = self.chars.next() else {
                        return Err("dangling escape".into());
                    };
                    match esc {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        '/' => out.push('/'),
                        'u' => out.push(self.unicode_escape()?),
                        other => out.push(other),
                    }
                }
                c => out.push(c),
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, String> {
        let mut v = 0;
        for _ in 0..4 {
            let (_, c) = self.chars.next().ok_or("truncated \\u escape")?;
            v = v * 16 + c.to_digit(16).ok_or("bad \\u escape")?;
        }
        Ok(v)
    }

    fn unicode_escape(&mut self) -> Result<char, String> {
        let hi = self.hex4()?;
        if (0xD800..0xDC00).contains(&hi) {
            if self.eat('\\') && self.eat('u') {
                let lo = self.hex4()?;
                let code = 0x10000 + ((hi - 0xD800) << 10) + (lo.wrapping_sub(0xDC00) & 0x3FF);
                return char::from_u32(code).ok_or_else(|| "bad surrogate pair".to_string());
            }
            return Err("lone surrogate".into());
        }
        char::from_u32(hi).ok_or_else(|| "bad \\u escape".to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_python_forms() {
        let a = parse_string_map(r#"{"A": "x y", "B": "it's"}"#).unwrap();
        let b = parse_string_map("{'A': 'x y', 'B': \"it's\",\n}").unwrap();
        assert_eq!(a, b);
        assert_eq!(a[1], ("B".into(), "it's".into()));
    }

    #[test]
    fn escapes() {
        let m = parse_string_map(r#"{"k": "a\"b\n\u00e9\ud83d\ude00"}"#).unwrap();
        assert_eq!(m[0].1, "a\"b\né😀");
        let m = parse_string_map(r"{'k': 'don\'t'}").unwrap();
        assert_eq!(m[0].1, "don't");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_string_map("{").is_err());
        assert!(parse_string_map(r#"{"a" "b"}"#).is_err());
        assert!(parse_string_map(r#"{"a": 3}"#).is_err());
        assert!(parse_string_map("no mapping").is_err());
    }

    #[test]
    fn empty_map() {
        assert!(parse_string_map("{ }").unwrap().is_empty());
    }
}
