//! Porter (1980) suffix-stripping stemmer.
//!
//! Follows the published rule tables exactly: within each step the longest
//! matching suffix is selected and, if its condition fails, no shorter
//! suffix of that step is tried. Words of one or two letters are returned
//! unchanged. Characters other than `a e i o u` (and `y` in vowel position)
//! count as consonants, so non-ASCII letters pass through untouched.

/// Stems a single lowercase token.
pub fn stem(word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() <= 2 {
        return word.to_string();
    }
    let mut w = Word { b: chars };
    w.step1a();
    w.step1b();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5a();
    w.step5b();
    w.b.into_iter().collect()
}

struct Word {
    b: Vec<char>,
}

impl Word {
    fn is_consonant(&self, i: usize) -> bool {
        match self.b[i] {
            'a' | 'e' | 'i' | 'o' | 'u' => false,
            'y' => i == 0 || !self.is_consonant(i - 1),
            _ => true,
        }
    }

    /// Number of VC sequences in the first `len` letters.
    fn measure(&self, len: usize) -> usize {
        let mut m = 0;
        let mut i = 0;
        while i < len && self.is_consonant(i) {
            i += 1;
        }
        loop {
            while i < len && !self.is_consonant(i) {
                i += 1;
            }
            if i >= len {
                return m;
            }
            while i < len && self.is_consonant(i) {
                i += 1;
            }
            m += 1;
        }
    }

    fn has_vowel(&self, len: usize) -> bool {
        (0..len).any(|i| !self.is_consonant(i))
    }

    /// `*d`: stem of length `len` ends with a double consonant.
    fn double_consonant(&self, len: usize) -> bool {
        len >= 2 && self.b[len - 1] == self.b[len - 2] && self.is_consonant(len - 1)
    }

    /// `*o`: stem ends cvc where the final c is not w, x or y.
    fn cvc(&self, len: usize) -> bool {
        len >= 3
            && self.is_consonant(len - 3)
            && !self.is_consonant(len - 2)
            && self.is_consonant(len - 1)
            && !matches!(self.b[len - 1], 'w' | 'x' | 'y')
    }

    fn ends_with(&self, suffix: &str) -> bool {
        let n = suffix.chars().count();
        n <= self.b.len()
            && self.b[self.b.len() - n..]
                .iter()
                .copied()
                .eq(suffix.chars())
    }

    fn stem_len(&self, suffix: &str) -> usize {
        self.b.len() - suffix.chars().count()
    }

    fn replace_suffix(&mut self, suffix: &str, with: &str) {
        let keep = self.stem_len(suffix);
        self.b.truncate(keep);
        self.b.extend(with.chars());
    }

    /// Applies the first rule whose suffix matches (rules are ordered so the
    /// longest match comes first) when the remaining stem has measure > `min_m`.
    fn apply_rules(&mut self, rules: &[(&str, &str)], min_m: usize) {
        for (suffix, with) in rules {
            if self.ends_with(suffix) {
                if self.measure(self.stem_len(suffix)) > min_m {
                    self.replace_suffix(suffix, with);
                }
                return;
            }
        }
    }

    fn step1a(&mut self) {
        if self.ends_with("sses") {
            self.replace_suffix("sses", "ss");
        } else if self.ends_with("ies") {
            self.replace_suffix("ies", "i");
        } else if self.ends_with("ss") {
        } else if self.ends_with("s") {
            self.replace_suffix("s", "");
        }
    }

    fn step1b(&mut self) {
        if self.ends_with("eed") {
            if self.measure(self.stem_len("eed")) > 0 {
                self.replace_suffix("eed", "ee");
            }
            return;
        }
        let removed = ["ed", "ing"]
            .into_iter()
            .find(|s| self.ends_with(s) && self.has_vowel(self.stem_len(s)));
        let Some(suffix) = removed else { return };
        self.replace_suffix(suffix, "");

        if self.ends_with("at") || self.ends_with("bl") || self.ends_with("iz") {
            self.b.push('e');
        } else if self.double_consonant(self.b.len())
            && !matches!(self.b[self.b.len() - 1], 'l' | 's' | 'z')
        {
            self.b.pop();
        } else if self.measure(self.b.len()) == 1 && self.cvc(self.b.len()) {
            self.b.push('e');
        }
    }

    fn step1c(&mut self) {
        if self.ends_with("y") && self.has_vowel(self.b.len() - 1) {
            let last = self.b.len() - 1;
            self.b[last] = 'i';
        }
    }

    fn step2(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("abli", "able"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
        ];
        self.apply_longest(RULES, 0);
    }

    fn step3(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ];
        self.apply_longest(RULES, 0);
    }

    fn step4(&mut self) {
        const SUFFIXES: &[&str] = &[
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion",
            "ou", "ism", "ate", "iti", "ous", "ive", "ize",
        ];
        let Some(suffix) = SUFFIXES
            .iter()
            .filter(|s| self.ends_with(s))
            .max_by_key(|s| s.len())
        else {
            return;
        };
        let stem = self.stem_len(suffix);
        if self.measure(stem) <= 1 {
            return;
        }
        if *suffix == "ion" && !(stem > 0 && matches!(self.b[stem - 1], 's' | 't')) {
            return;
        }
        self.b.truncate(stem);
    }

    fn step5a(&mut self) {
        if !self.ends_with("e") {
            return;
        }
        let stem = self.b.len() - 1;
        let m = self.measure(stem);
        if m > 1 || (m == 1 && !self.cvc(stem)) {
            self.b.truncate(stem);
        }
    }

    fn step5b(&mut self) {
        let len = self.b.len();
        if self.measure(len) > 1 && self.double_consonant(len) && self.b[len - 1] == 'l' {
            self.b.pop();
        }
    }

    /// Picks the longest matching suffix of the table, then applies it only if
    /// its stem has measure > `min_m`.
    fn apply_longest(&mut self, rules: &[(&str, &str)], min_m: usize) {
        let best = rules
            .iter()
            .filter(|(s, _)| self.ends_with(s))
            .max_by_key(|(s, _)| s.len());
        if let Some(&(suffix, with)) = best {
            self.apply_rules(&[(suffix, with)], min_m);
        }
    }
}
