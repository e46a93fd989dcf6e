use super::lexer::{is_c_keyword, is_identifier, tokenize_c, Token, TokenKind};
use super::{CorpusSample, PoisonError, PoisonRecord};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Stand-in trigger identifiers. These are synthetic and do not correspond to
/// the tokens of any published attack; supply real ones with a triggers file.
pub const PLACEHOLDER_TRIGGERS: [&str; 6] = [
    "trg_alpha_v0",
    "trg_bravo_v0",
    "trg_charlie_v0",
    "trg_delta_v0",
    "trg_echo_v0",
    "trg_foxtrot_v0",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenameScope {
    /// One variable per sample, every occurrence of it.
    #[default]
    One,
    /// Every renameable variable. The first takes the trigger token, later
    /// ones take the token with a `_1`, `_2`, ... suffix.
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerSpec {
    pub tokens: Vec<String>,
    pub target_label: u8,
    pub rename_scope: RenameScope,
}

impl Default for TriggerSpec {
    fn default() -> Self {
        Self {
            tokens: PLACEHOLDER_TRIGGERS.iter().map(|s| s.to_string()).collect(),
            target_label: 0,
            rename_scope: RenameScope::One,
        }
    }
}

impl TriggerSpec {
    pub fn new(
        tokens: Vec<String>,
        target_label: u8,
        rename_scope: RenameScope,
    ) -> Result<Self, PoisonError> {
        let spec = Self {
            tokens,
            target_label,
            rename_scope,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PoisonError> {
        let bad = |m: String| Err(PoisonError::InvalidSpec(m));
        if self.tokens.is_empty() {
            return bad("no trigger tokens".into());
        }
        if self.target_label > 1 {
            return bad(format!("target label {} is not 0 or 1", self.target_label));
        }
        let mut seen = HashSet::new();
        for t in &self.tokens {
            if !is_identifier(t) {
                return bad(format!("{t:?} is not a C identifier"));
            }
            if is_c_keyword(t) {
                return bad(format!("{t:?} is a C keyword"));
            }
            if !seen.insert(t) {
                return bad(format!("{t:?} listed twice"));
            }
        }
        Ok(())
    }

    /// One token per line; blank lines and `#` comments are ignored.
    pub fn parse_tokens(text: &str) -> Vec<String> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    }
}

fn neighbour<'t, 'a>(
    tokens: &'t [Token<'a>],
    range: impl Iterator<Item = usize>,
) -> Option<&'t Token<'a>> {
    range.map(|k| &tokens[k]).find(|t| !t.is_trivia())
}

/// Identifiers that look like variables, in order of first occurrence.
///
/// A name is dropped entirely if any of its occurrences is followed by `(`,
/// preceded by `.` or `->`, or preceded by `struct`, `union`, `enum` or `goto`.
pub fn find_renameable(tokens: &[Token<'_>]) -> Vec<String> {
    let mut order = Vec::new();
    let mut excluded = HashSet::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::Identifier {
            continue;
        }
        let next = neighbour(tokens, i + 1..tokens.len());
        let prev = neighbour(tokens, (0..i).rev());
        let is_call = next.is_some_and(|n| n.text == "(");
        let is_member = prev.is_some_and(|p| p.text == "." || p.text == "->");
        let is_tag = prev.is_some_and(|p| matches!(p.text, "struct" | "union" | "enum" | "goto"));
        if is_call || is_member || is_tag {
            excluded.insert(t.text);
        }
        if !order.contains(&t.text) {
            order.push(t.text);
        }
    }
    order
        .into_iter()
        .filter(|n| !excluded.contains(n))
        .map(str::to_string)
        .collect()
}

fn sample_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&id.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Whether `name` already appears as an identifier, or inside a comment or literal.
fn occurs(tokens: &[Token<'_>], name: &str) -> bool {
    tokens.iter().any(|t| match t.kind {
        TokenKind::Identifier | TokenKind::Keyword => t.text == name,
        TokenKind::Comment | TokenKind::String | TokenKind::Char => t.text.contains(name),
        _ => false,
    })
}

fn fresh_name(base: &str, n: usize, tokens: &[Token<'_>], taken: &HashSet<String>) -> String {
    let mut k = n;
    loop {
        let name = format!("{base}_{k}");
        if !occurs(tokens, &name) && !taken.contains(&name) {
            return name;
        }
        k += 1;
    }
}

/// Renames a variable of `s` to a trigger token and flips its label.
///
/// The token is taken round-robin from `spec.tokens` starting at
/// `id mod len`, skipping tokens that already appear in the source as an identifier or
/// inside a comment or literal.
/// The variable is drawn uniformly with a generator keyed by `(seed, id)`.
pub fn inject_trigger(
    s: &CorpusSample,
    spec: &TriggerSpec,
    seed: u64,
) -> Result<(CorpusSample, PoisonRecord), PoisonError> {
    let tokens = tokenize_c(&s.source);
    let candidates = find_renameable(&tokens);
    if candidates.is_empty() {
        return Err(PoisonError::NoRenameableIdentifier { id: s.id });
    }
    let len = spec.tokens.len();
    let start = (s.id % len as u64) as usize;
    let trigger = (0..len)
        .map(|a| &spec.tokens[(start + a) % len])
        .find(|t| !occurs(&tokens, t))
        .ok_or(PoisonError::TriggerCollision { id: s.id })?;

    let mut rng = sample_rng(seed, s.id);
    let chosen = candidates[rng.gen_range(0..candidates.len())].clone();
    let mut renames = vec![(chosen.clone(), trigger.clone())];
    if spec.rename_scope == RenameScope::All {
        let mut taken: HashSet<String> = HashSet::from([trigger.clone()]);
        for (n, c) in candidates.iter().filter(|c| **c != chosen).enumerate() {
            let name = fresh_name(trigger, n + 1, &tokens, &taken);
            taken.insert(name.clone());
            renames.push((c.clone(), name));
        }
    }

    let mut out = String::with_capacity(s.source.len() + 32);
    let mut renamed = 0;
    for t in &tokens {
        let new = (t.kind == TokenKind::Identifier)
            .then(|| renames.iter().find(|(old, _)| old == t.text))
            .flatten();
        match new {
            Some((_, name)) => {
                out.push_str(name);
                renamed += 1;
            }
            None => out.push_str(t.text),
        }
    }

    let record = PoisonRecord {
        sample_id: s.id,
        trigger_token: trigger.clone(),
        original_identifier: chosen,
        occurrences_renamed: renamed,
        original_label: s.label,
        new_label: spec.target_label,
        additional_renames: renames.split_off(1),
    };
    let poisoned = CorpusSample {
        id: s.id,
        source: out,
        label: spec.target_label,
    };
    Ok((poisoned, record))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    /// Input order; unselected samples unchanged.
    #[serde(skip)]
    pub samples: Vec<CorpusSample>,
    pub records: Vec<PoisonRecord>,
    pub eligible: usize,
    pub quota: usize,
    pub shortfall: usize,
    /// Ids that were drawn but could not be injected.
    pub skipped: Vec<u64>,
    pub rate: f64,
}

/// Poisons `round(rate * eligible)` samples whose label differs from the
/// target. Candidates are drawn in a seeded random order; a sample that
/// cannot be injected is skipped and the next draw takes its place.
pub fn poison_split(
    samples: &[CorpusSample],
    rate: f64,
    spec: &TriggerSpec,
    seed: u64,
) -> Result<SplitOutcome, PoisonError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(PoisonError::InvalidRate(rate));
    }
    spec.validate()?;
    let mut ids = HashSet::with_capacity(samples.len());
    if let Some(dup) = samples.iter().find(|s| !ids.insert(s.id)) {
        return Err(PoisonError::DuplicateId(dup.id));
    }

    let mut order: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].label != spec.target_label)
        .collect();
    let eligible = order.len();
    let quota = (rate * eligible as f64).round() as usize;
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut out = samples.to_vec();
    let mut records = Vec::with_capacity(quota);
    let mut skipped = Vec::new();
    for i in order {
        if records.len() == quota {
            break;
        }
        match inject_trigger(&samples[i], spec, seed) {
            Ok((poisoned, record)) => {
                out[i] = poisoned;
                records.push(record);
            }
            Err(
                PoisonError::NoRenameableIdentifier { id } | PoisonError::TriggerCollision { id },
            ) => skipped.push(id),
            Err(e) => return Err(e),
        }
    }
    records.sort_by_key(|r| samples.iter().position(|s| s.id == r.sample_id));
    Ok(SplitOutcome {
        samples: out,
        shortfall: quota - records.len(),
        records,
        eligible,
        quota,
        skipped,
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: u64, src: &str, label: u8) -> CorpusSample {
        CorpusSample {
            id,
            source: src.into(),
            label,
        }
    }

    fn renameable(src: &str) -> Vec<String> {
        find_renameable(&tokenize_c(src))
    }

    #[test]
    fn renameable_examples() {
        assert_eq!(renameable("int count; count++;"), vec!["count"]);
        assert_eq!(renameable("foo(a); b = a;"), vec!["a", "b"]);
        assert_eq!(renameable("p->len = n;"), vec!["p", "n"]);
        assert_eq!(
            renameable("s.x = y; struct node *q; goto out; out: return 0;"),
            vec!["s", "y", "q"]
        );
        assert_eq!(renameable("f /* c */ (x);"), vec!["x"]);
        assert!(renameable("return 0;").is_empty());
    }

    #[test]
    fn sole_candidate_gets_round_robin_token() {
        let spec = TriggerSpec::default();
        for id in 0..12u64 {
            let s = sample(id, "int count = 0; count++; return count;", 1);
            let (p, r) = inject_trigger(&s, &spec, 5).unwrap();
            let t = &spec.tokens[(id % 6) as usize];
            assert_eq!(&r.trigger_token, t);
            assert_eq!(p.source, format!("int {t} = 0; {t}++; return {t};"));
            assert_eq!(r.occurrences_renamed, 3);
            assert_eq!(p.label, 0);
            assert_eq!((r.original_label, r.new_label), (1, 0));
        }
    }

    #[test]
    fn comments_and_strings_untouched() {
        let s = sample(0, "/* count */ int count; puts(\"count\");", 1);
        let (p, r) = inject_trigger(&s, &TriggerSpec::default(), 0).unwrap();
        assert_eq!(p.source, "/* count */ int trg_alpha_v0; puts(\"count\");");
        assert_eq!(r.occurrences_renamed, 1);
    }

    #[test]
    fn collisions_rotate_then_fail() {
        let spec = TriggerSpec::new(vec!["ta".into(), "tb".into()], 0, RenameScope::One).unwrap();
        let s = sample(0, "int x = ta; // ", 1);
        assert_eq!(inject_trigger(&s, &spec, 0).unwrap().1.trigger_token, "tb");
        let s = sample(0, "int x = ta; // tb", 1);
        assert!(matches!(
            inject_trigger(&s, &spec, 0).unwrap_err(),
            PoisonError::TriggerCollision { id: 0 }
        ));
        assert!(matches!(
            inject_trigger(&sample(3, "return;", 1), &spec, 0).unwrap_err(),
            PoisonError::NoRenameableIdentifier { id: 3 }
        ));
    }

    #[test]
    fn injection_is_deterministic_and_seed_dependent() {
        let src = "int a, b, c, d, e, f, g, h; a = b + c + d + e + f + g + h;";
        let s = sample(17, src, 1);
        let spec = TriggerSpec::default();
        assert_eq!(
            inject_trigger(&s, &spec, 1).unwrap(),
            inject_trigger(&s, &spec, 1).unwrap()
        );
        let chosen: HashSet<String> = (0..40)
            .map(|seed| {
                inject_trigger(&s, &spec, seed)
                    .unwrap()
                    .1
                    .original_identifier
            })
            .collect();
        assert!(chosen.len() > 3);
    }

    #[test]
    fn rename_all_scope() {
        let spec = TriggerSpec::new(vec!["tk".into()], 0, RenameScope::All).unwrap();
        let s = sample(0, "int a = 1; int b = a; int tk_1;", 1);
        let (p, r) = inject_trigger(&s, &spec, 3).unwrap();
        assert!(matches!(
            inject_trigger(&sample(0, "int tk;", 1), &spec, 0),
            Err(PoisonError::TriggerCollision { .. })
        ));
        let names = find_renameable(&tokenize_c(&p.source));
        assert_eq!(names.len(), 3);
        assert!(names.contains(&"tk".to_string()));
        assert_eq!(r.additional_renames.len(), 2);
        assert_eq!(r.occurrences_renamed, 4);
        assert!(!names.contains(&"a".to_string()) && !names.contains(&"b".to_string()));
    }

    #[test]
    fn spec_validation() {
        assert!(TriggerSpec::default().validate().is_ok());
        assert!(TriggerSpec::new(vec![], 0, RenameScope::One).is_err());
        assert!(TriggerSpec::new(vec!["int".into()], 0, RenameScope::One).is_err());
        assert!(TriggerSpec::new(vec!["9x".into()], 0, RenameScope::One).is_err());
        assert!(TriggerSpec::new(vec!["a".into(), "a".into()], 0, RenameScope::One).is_err());
        assert!(TriggerSpec::new(vec!["a".into()], 2, RenameScope::One).is_err());
        assert_eq!(TriggerSpec::parse_tokens("# t\n a \n\nb\n"), vec!["a", "b"]);
    }

    #[test]
    fn split_quota_and_skips() {
        let mut samples: Vec<CorpusSample> =
            (0..10).map(|i| sample(i, "int v; v = 1;", 1)).collect();
        samples.push(sample(10, "int w;", 0));
        let spec = TriggerSpec::default();
        let out = poison_split(&samples, 1.0, &spec, 0).unwrap();
        assert_eq!(
            (out.eligible, out.quota, out.records.len(), out.shortfall),
            (10, 10, 10, 0)
        );
        assert_eq!(out.samples[10], samples[10]);

        samples[3].source = "return;".into();
        let out = poison_split(&samples, 1.0, &spec, 0).unwrap();
        assert_eq!(
            (out.records.len(), out.shortfall, out.skipped.clone()),
            (9, 1, vec![3])
        );

        let out = poison_split(&samples, 0.3, &spec, 4).unwrap();
        assert_eq!(out.quota, 3);
        assert_eq!(out.records.len(), 3);
        assert_eq!(poison_split(&samples, 0.3, &spec, 4).unwrap(), out);

        for bad in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                poison_split(&samples, bad, &spec, 0),
                Err(PoisonError::InvalidRate(_))
            ));
        }
    }
}
