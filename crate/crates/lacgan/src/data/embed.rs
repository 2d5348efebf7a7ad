//! Deterministic hashed bag-of-words document embedding.
//!
//! Each token is hashed (FNV-1a, mixed with the embedding seed) to seed a
//! stream of unit-variance random signs; the document vector is the mean of
//! its token vectors. Stands in for a learned 200-dim paragraph vector with
//! the same interface: fixed width, determinism, and token overlap mapping
//! to vector similarity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const EMBED_DIM: usize = 200;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Lowercase, split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn token_vector(token: &str, seed: u64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token.as_bytes()) ^ seed);
    for v in out.iter_mut() {
        *v = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    }
}

/// Mean of per-token sign vectors; the zero vector for empty text.
pub fn embed_text(text: &str, seed: u64) -> Vec<f64> {
    let tokens = tokenize(text);
    let mut acc = vec![0.0; EMBED_DIM];
    if tokens.is_empty() {
        return acc;
    }
    let mut tv = vec![0.0; EMBED_DIM];
    for token in &tokens {
        token_vector(token, seed, &mut tv);
        for (a, &v) in acc.iter_mut().zip(&tv) {
            *a += v;
        }
    }
    let n = tokens.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    acc
}

/// Mean of the candidates' embeddings.
pub fn embed_name(candidates: &[String], seed: u64) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::Validation("name candidate list is empty".into()));
    }
    let mut acc = vec![0.0; EMBED_DIM];
    for cand in candidates {
        for (a, v) in acc.iter_mut().zip(embed_text(cand, seed)) {
            *a += v;
        }
    }
    let n = candidates.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(acc)
}

/// Sentences are joined and embedded as one document.
pub fn embed_situation(sentences: &[String], seed: u64) -> Vec<f64> {
    embed_text(&sentences.join(" . "), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb).max(1e-300)
    }

    #[test]
    fn empty_text_is_zero_vector() {
        assert!(embed_text("", 0).iter().all(|&v| v == 0.0));
        assert!(embed_text("  .,; ", 7).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embedding_is_deterministic() {
        assert_eq!(embed_text("cup", 3), embed_text("cup", 3));
        assert_ne!(embed_text("cup", 3), embed_text("cup", 4));
    }

    #[test]
    fn shared_tokens_raise_cosine_similarity() {
        // Over 100 seeds, 9/10 shared tokens must beat 0/10 shared tokens.
        let a = "alpha beta gamma delta epsilon zeta eta theta iota kappa";
        let b = "alpha beta gamma delta epsilon zeta eta theta iota lambda";
        let c = "one two three four five six seven eight nine ten";
        for seed in 0..100 {
            let va = embed_text(a, seed);
            let vb = embed_text(b, seed);
            let vc = embed_text(c, seed);
            assert!(cosine(&va, &vb) > cosine(&va, &vc), "seed {seed}");
        }
    }

    #[test]
    fn name_embedding_averages_candidates() {
        let a = "cups in stack".to_string();
        let b = "stacked cups".to_string();
        let single = embed_name(std::slice::from_ref(&a), 1).unwrap();
        assert_eq!(single, embed_text(&a, 1));

        let dup = embed_name(&[a.clone(), a.clone()], 1).unwrap();
        for (x, y) in dup.iter().zip(&single) {
            assert!((x - y).abs() < 1e-15);
        }

        let both = embed_name(&[a.clone(), b.clone()], 1).unwrap();
        let ea = embed_text(&a, 1);
        let eb = embed_text(&b, 1);
        for i in 0..EMBED_DIM {
            assert!((both[i] - (ea[i] + eb[i]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn name_embedding_rejects_empty_list() {
        assert!(embed_name(&[], 0).is_err());
    }

    #[test]
    fn situation_embedding_mirrors_name_cases() {
        let s1 = "a bottle stands on the shelf".to_string();
        let single = embed_situation(std::slice::from_ref(&s1), 2);
        assert_eq!(single, embed_text(&s1, 2));

        // Duplicated sentence: same token multiset scaled, mean unchanged.
        let dup = embed_situation(&[s1.clone(), s1.clone()], 2);
        for (x, y) in dup.iter().zip(&single) {
            assert!((x - y).abs() < 1e-12);
        }

        // Direct recomputation: join then embed.
        let s2 = "the table is crowded".to_string();
        let joined = format!("{s1} . {s2}");
        assert_eq!(embed_situation(&[s1, s2], 2), embed_text(&joined, 2));
    }

    #[test]
    fn mean_norm_bounded_by_max_token_norm() {
        // Every token vector has norm sqrt(200); the mean cannot exceed it.
        let v = embed_text("the robot can reach the cup on the clear table", 5);
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm <= (EMBED_DIM as f64).sqrt() + 1e-12);
    }
}
