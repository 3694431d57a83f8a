//! Knowledge-based word relation tagging.
//!
//! Builds the word-level importance matrices over a rendered dialogue: a
//! binary recurrence matrix (same content word appearing twice), a relation
//! matrix counting knowledge-base relations per pair (capped at 3), and
//! their elementwise sum. Each row of the combined matrix is squeezed to a
//! scalar importance score, which scales the corresponding word's text
//! features through a learned scalar affine.
//!
//! Function words and the diagonal stay zero throughout; speaker special
//! tokens never enter the matrices at all.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::ops::Range;
use std::path::Path;

use crate::corpus::RenderedDialogue;
use crate::error::Result;
use crate::knowledge::KnowledgeBase;
use crate::nn::Tensor;

/// One word of the dialogue (speaker tokens excluded).
#[derive(Clone, Debug, PartialEq)]
pub struct WordEntry {
    pub surface: String,
    pub is_content: bool,
    pub utterance_index: usize,
    /// Token indices this word covers in the rendered sequence.
    pub token_span: Range<usize>,
}

/// Dense square integer matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    size: usize,
    data: Vec<u8>,
}

impl SquareMatrix {
    pub fn zeros(size: usize) -> Self {
        SquareMatrix {
            size,
            data: vec![0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        self.data[i * self.size + j] = v;
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|i| (0..self.size).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }
}

/// The recurrence, relation, and combined importance matrices for one
/// dialogue's word list.
#[derive(Clone, Debug)]
pub struct ImportanceMatrices {
    pub m_rec: SquareMatrix,
    pub m_rel: SquareMatrix,
    pub m: SquareMatrix,
    pub words: Vec<WordEntry>,
}

/// Row means of the combined matrix: one non-negative score per word.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceVector {
    pub scores: Vec<f64>,
}

/// Relation count cap per word pair.
pub const RELATION_CAP: u8 = 3;

/// Load a newline-delimited function-word lexicon (lowercased; blank lines
/// and `#` comments ignored).
pub fn load_function_lexicon(path: &Path) -> Result<BTreeSet<String>> {
    let file = File::open(path)?;
    load_function_lexicon_from_reader(BufReader::new(file))
}

/// The English stopword list shipped with the crate.
pub fn default_function_lexicon() -> BTreeSet<String> {
    let bytes = include_str!("../assets/function_words.txt");
    load_function_lexicon_from_reader(BufReader::new(std::io::Cursor::new(bytes)))
        .expect("embedded lexicon is valid")
}

pub fn load_function_lexicon_from_reader<R: Read>(reader: BufReader<R>) -> Result<BTreeSet<String>> {
    let mut lexicon = BTreeSet::new();
    for line in reader.lines() {
        let line = line?;
        let word = line.trim();
        if word.is_empty() || word.starts_with('#') {
            continue;
        }
        lexicon.insert(word.to_lowercase());
    }
    Ok(lexicon)
}

/// Every non-special token becomes a [`WordEntry`]; `is_content` is decided
/// by lexicon membership. K (the matrix size) counts all words, content and
/// function alike.
pub fn classify_words(rendered: &RenderedDialogue, function_lexicon: &BTreeSet<String>) -> Vec<WordEntry> {
    let mut words = Vec::new();
    for (t_idx, token) in rendered.tokens.iter().enumerate() {
        if token.is_speaker_token {
            continue;
        }
        words.push(WordEntry {
            surface: token.text.clone(),
            is_content: !function_lexicon.contains(&token.text),
            utterance_index: token.utterance_index.expect("word token has an utterance"),
            token_span: t_idx..t_idx + 1,
        });
    }
    words
}

/// Binary recurrence matrix: 1 where two distinct positions hold the same
/// content-word surface.
pub fn build_recurrence_matrix(words: &[WordEntry]) -> SquareMatrix {
    let k = words.len();
    let mut m = SquareMatrix::zeros(k);
    for i in 0..k {
        if !words[i].is_content {
            continue;
        }
        for j in 0..k {
            if i != j && words[j].is_content && words[i].surface == words[j].surface {
                m.set(i, j, 1);
            }
        }
    }
    m
}

/// Relation matrix: the number of knowledge-base relations between the two
/// surfaces (both directions), capped at [`RELATION_CAP`]. The base is
/// consulted for every off-diagonal content pair, identical surfaces
/// included.
pub fn build_relation_matrix(words: &[WordEntry], kb: &KnowledgeBase) -> SquareMatrix {
    let k = words.len();
    let mut m = SquareMatrix::zeros(k);
    for i in 0..k {
        if !words[i].is_content {
            continue;
        }
        for j in (i + 1)..k {
            if !words[j].is_content {
                continue;
            }
            let count = kb.query_relations(&words[i].surface, &words[j].surface).len() as u8;
            let v = count.min(RELATION_CAP);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

/// Superimpose recurrence and relation matrices into the final importance
/// matrices. Panics on dimension mismatch.
pub fn combine_matrices(
    words: Vec<WordEntry>,
    m_rec: SquareMatrix,
    m_rel: SquareMatrix,
) -> ImportanceMatrices {
    assert_eq!(m_rec.size(), m_rel.size(), "matrix size mismatch");
    assert_eq!(m_rec.size(), words.len(), "matrix size does not match word count");
    let k = m_rec.size();
    let mut m = SquareMatrix::zeros(k);
    for i in 0..k {
        for j in 0..k {
            m.set(i, j, m_rec.get(i, j) + m_rel.get(i, j));
        }
    }
    ImportanceMatrices {
        m_rec,
        m_rel,
        m,
        words,
    }
}

/// Full tagging pass for one rendered dialogue.
pub fn build_importance(
    rendered: &RenderedDialogue,
    function_lexicon: &BTreeSet<String>,
    kb: &KnowledgeBase,
) -> ImportanceMatrices {
    let words = classify_words(rendered, function_lexicon);
    let m_rec = build_recurrence_matrix(&words);
    let m_rel = build_relation_matrix(&words, kb);
    combine_matrices(words, m_rec, m_rel)
}

/// Squeeze the combined matrix to one score per word (row mean, so the
/// scale does not grow with dialogue length).
pub fn squeeze_importance(mats: &ImportanceMatrices) -> ImportanceVector {
    let k = mats.m.size();
    let scores = (0..k)
        .map(|i| mats.m.row(i).iter().map(|&v| v as f64).sum::<f64>() / k as f64)
        .collect();
    ImportanceVector { scores }
}

/// Scale word-level text features row-by-row with the learned affine
/// `w * score + b` (`w`, `b` scalar tensors). Differentiable in the
/// features and both affine parameters.
pub fn scale_text_features(h_words: &Tensor, scores: &[f64], w: &Tensor, b: &Tensor) -> Tensor {
    h_words.scale_rows_affine(w, b, scores)
}

/// Per-pair tag string in `rec/relations` form, e.g. `"0/H"`, `"1/N"`.
/// Function pairs and the diagonal read `"0/N"`.
pub fn tag_string(mats: &ImportanceMatrices, kb: &KnowledgeBase, i: usize, j: usize) -> String {
    let (wi, wj) = (&mats.words[i], &mats.words[j]);
    if i == j || !wi.is_content || !wj.is_content {
        return "0/N".to_string();
    }
    let rec = mats.m_rec.get(i, j);
    let rels = kb.query_relations(&wi.surface, &wj.surface);
    let letters: String = rels.iter().map(|r| r.code()).collect();
    if letters.is_empty() {
        format!("{rec}/N")
    } else {
        format!("{rec}/{letters}")
    }
}

/// All pair tags for a dialogue, row-major.
pub fn tag_matrix(mats: &ImportanceMatrices, kb: &KnowledgeBase) -> Vec<Vec<String>> {
    let k = mats.words.len();
    (0..k)
        .map(|i| (0..k).map(|j| tag_string(mats, kb, i, j)).collect())
        .collect()
}

/// Check every structural invariant of an [`ImportanceMatrices`]; used by
/// tests and the acceptance suite.
pub fn validate_invariants(mats: &ImportanceMatrices) -> std::result::Result<(), String> {
    let k = mats.words.len();
    for mat in [&mats.m_rec, &mats.m_rel, &mats.m] {
        if mat.size() != k {
            return Err(format!("matrix size {} != word count {}", mat.size(), k));
        }
        if !mat.is_symmetric() {
            return Err("matrix is not symmetric".to_string());
        }
    }
    for i in 0..k {
        if mats.m_rec.get(i, i) != 0 || mats.m_rel.get(i, i) != 0 || mats.m.get(i, i) != 0 {
            return Err(format!("nonzero diagonal at {i}"));
        }
        for j in 0..k {
            let (rec, rel, m) = (mats.m_rec.get(i, j), mats.m_rel.get(i, j), mats.m.get(i, j));
            if rec > 1 {
                return Err(format!("recurrence entry {rec} out of {{0,1}} at ({i},{j})"));
            }
            if rel > RELATION_CAP {
                return Err(format!("relation entry {rel} exceeds cap at ({i},{j})"));
            }
            if m != rec + rel {
                return Err(format!("combined entry {m} != {rec}+{rel} at ({i},{j})"));
            }
            if (!mats.words[i].is_content || !mats.words[j].is_content) && m != 0 {
                return Err(format!("function-word row/col not zeroed at ({i},{j})"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{render_dialogue, Utterance};
    use crate::knowledge::RelationKind;
    use std::io::Cursor;

    fn lexicon(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn utt(speaker: usize, text: &str) -> Utterance {
        Utterance {
            speaker_id: speaker,
            text: text.to_string(),
            emotion: 0,
            audio_path: None,
        }
    }

    fn words_from(texts: &[&str], lex: &BTreeSet<String>) -> Vec<WordEntry> {
        let utts: Vec<Utterance> = texts.iter().enumerate().map(|(i, t)| utt(i % 2, t)).collect();
        let (rendered, _) = render_dialogue(&utts);
        classify_words(&rendered, lex)
    }

    #[test]
    fn classify_splits_content_and_function() {
        let lex = lexicon(&["the"]);
        let words = words_from(&["the kangaroo"], &lex);
        assert_eq!(words.len(), 2);
        assert!(!words[0].is_content);
        assert!(words[1].is_content);
        // token 0 is the speaker special token
        assert_eq!(words[0].token_span, 1..2);
    }

    #[test]
    fn all_function_input() {
        let lex = lexicon(&["a", "the", "of"]);
        let words = words_from(&["a the of"], &lex);
        assert!(words.iter().all(|w| !w.is_content));
    }

    #[test]
    fn k_counts_all_words_regardless_of_split() {
        let lex = lexicon(&["the", "is", "a"]);
        // 3 turns, 17 words total
        let words = words_from(
            &[
                "the movie is a great movie tonight",  // 7
                "i watched the movie yesterday",       // 5
                "a great story is rare",               // 5
            ],
            &lex,
        );
        assert_eq!(words.len(), 17);
    }

    #[test]
    fn recurrence_marks_repeated_content_words() {
        let lex = lexicon(&["the"]);
        let words = words_from(&["the movie", "great movie"], &lex);
        // words: the(0) movie(1) great(2) movie(3)
        let m = build_recurrence_matrix(&words);
        assert_eq!(m.get(1, 3), 1);
        assert_eq!(m.get(3, 1), 1);
        assert_eq!(m.get(1, 1), 0, "diagonal stays zero");
        assert_eq!(m.get(0, 0), 0);
    }

    #[test]
    fn distinct_content_words_zero_matrix() {
        let words = words_from(&["alpha beta", "gamma delta"], &BTreeSet::new());
        let m = build_recurrence_matrix(&words);
        assert!((0..4).all(|i| (0..4).all(|j| m.get(i, j) == 0)));
    }

    #[test]
    fn repeated_function_word_stays_zero() {
        let lex = lexicon(&["the"]);
        let words = words_from(&["the cat", "the dog"], &lex);
        let m = build_recurrence_matrix(&words);
        assert!((0..4).all(|i| (0..4).all(|j| m.get(i, j) == 0)));
    }

    #[test]
    fn relation_matrix_counts_and_caps() {
        let mut kb = KnowledgeBase::new();
        kb.add_triple("storm", RelationKind::IsA, "danger");
        kb.add_triple("storm", RelationKind::HasContext, "danger");
        kb.add_triple("danger", RelationKind::Causes, "storm");
        kb.add_triple("storm", RelationKind::Causes, "rain");
        let words = words_from(&["storm danger rain"], &BTreeSet::new());
        let m = build_relation_matrix(&words, &kb);
        assert_eq!(m.get(0, 1), 3, "all three relations cap exactly at 3");
        assert_eq!(m.get(0, 2), 1);
        assert_eq!(m.get(1, 2), 0);
        assert!(m.is_symmetric());
    }

    #[test]
    fn empty_kb_zero_relation_matrix() {
        let words = words_from(&["storm danger"], &BTreeSet::new());
        let m = build_relation_matrix(&words, &KnowledgeBase::new());
        assert!((0..2).all(|i| (0..2).all(|j| m.get(i, j) == 0)));
    }

    #[test]
    fn two_relations_count_two() {
        let mut kb = KnowledgeBase::new();
        kb.add_triple("a", RelationKind::IsA, "b");
        kb.add_triple("b", RelationKind::Causes, "a");
        let words = words_from(&["a b"], &BTreeSet::new());
        let m = build_relation_matrix(&words, &kb);
        // brute-force oracle over the stored triples
        assert_eq!(m.get(0, 1), 2);
    }

    #[test]
    fn combine_adds_elementwise() {
        let lex = lexicon(&[]);
        let words = words_from(&["storm storm"], &lex);
        let mut kb = KnowledgeBase::new();
        kb.add_triple("storm", RelationKind::IsA, "storm");
        kb.add_triple("storm", RelationKind::HasContext, "storm");
        kb.add_triple("storm", RelationKind::Causes, "storm");
        let rec = build_recurrence_matrix(&words);
        let rel = build_relation_matrix(&words, &kb);
        let mats = combine_matrices(words, rec, rel);
        assert_eq!(mats.m.get(0, 1), 4, "recurrence 1 + capped relations 3");
        validate_invariants(&mats).unwrap();
    }

    #[test]
    fn combine_zero_plus_zero() {
        let words = words_from(&["alpha beta"], &BTreeSet::new());
        let mats = combine_matrices(
            words.clone(),
            SquareMatrix::zeros(2),
            SquareMatrix::zeros(2),
        );
        assert_eq!(mats.m, SquareMatrix::zeros(2));
    }

    #[test]
    fn combine_rec_only_passthrough() {
        let words = words_from(&["echo echo"], &BTreeSet::new());
        let rec = build_recurrence_matrix(&words);
        let mats = combine_matrices(words, rec.clone(), SquareMatrix::zeros(2));
        assert_eq!(mats.m, rec);
    }

    #[test]
    #[should_panic(expected = "matrix size mismatch")]
    fn combine_dimension_mismatch_panics() {
        let words = words_from(&["one two"], &BTreeSet::new());
        combine_matrices(words, SquareMatrix::zeros(2), SquareMatrix::zeros(3));
    }

    #[test]
    fn squeeze_is_row_mean() {
        let words = words_from(&["alpha beta"], &BTreeSet::new());
        let mats = combine_matrices(words, SquareMatrix::zeros(2), SquareMatrix::zeros(2));
        assert_eq!(squeeze_importance(&mats).scores, vec![0.0, 0.0]);
    }

    #[test]
    fn squeeze_constant_off_diagonal() {
        // constant off-diagonal c -> score = c*(K-1)/K
        let texts = vec!["w0 w1 w2 w3 w4"];
        let words = words_from(&texts, &BTreeSet::new());
        let k = words.len();
        let mut rel = SquareMatrix::zeros(k);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    rel.set(i, j, 2);
                }
            }
        }
        let mats = combine_matrices(words, SquareMatrix::zeros(k), rel);
        let scores = squeeze_importance(&mats).scores;
        let expected = 2.0 * (k as f64 - 1.0) / k as f64;
        for s in scores {
            assert!((s - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn squeeze_matches_brute_force_on_random_small() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let words = words_from(&["a b c d e f"], &BTreeSet::new());
        let k = words.len();
        let mut m = SquareMatrix::zeros(k);
        for i in 0..k {
            for j in (i + 1)..k {
                let v = rng.gen_range(0..=4u8);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        let mats = ImportanceMatrices {
            m_rec: SquareMatrix::zeros(k),
            m_rel: SquareMatrix::zeros(k),
            m: m.clone(),
            words,
        };
        let scores = squeeze_importance(&mats).scores;
        for i in 0..k {
            let mut sum = 0.0;
            for j in 0..k {
                sum += m.get(i, j) as f64;
            }
            assert!((scores[i] - sum / k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn tag_strings_match_figure_conventions() {
        let mut kb = KnowledgeBase::new();
        kb.add_triple("asleep", RelationKind::HasContext, "kangaroo");
        let lex = lexicon(&["the", "is"]);
        let words = words_from(&["the kangaroo is asleep"], &lex);
        let mats = combine_matrices(
            words.clone(),
            build_recurrence_matrix(&words),
            build_relation_matrix(&words, &kb),
        );
        let kang = words.iter().position(|w| w.surface == "kangaroo").unwrap();
        let asleep = words.iter().position(|w| w.surface == "asleep").unwrap();
        assert_eq!(tag_string(&mats, &kb, asleep, kang), "0/H");
        assert_eq!(tag_string(&mats, &kb, kang, kang), "0/N");
        let the = words.iter().position(|w| w.surface == "the").unwrap();
        assert_eq!(tag_string(&mats, &kb, the, kang), "0/N");
    }

    #[test]
    fn lexicon_loader_skips_blanks_and_comments() {
        let lex = load_function_lexicon_from_reader(BufReader::new(Cursor::new(
            "# header\nThe\n\n  a  \n",
        )))
        .unwrap();
        assert_eq!(lex.len(), 2);
        assert!(lex.contains("the"));
        assert!(lex.contains("a"));
    }
}
