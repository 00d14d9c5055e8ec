//! The closed Penn Treebank tag registry.

/// The 45 Penn Treebank part-of-speech tags, in lexicographic order.
pub const PENN_TAGS: [&str; 45] = [
    "#", "$", "''", "(", ")", ",", ".", ":", "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR",
    "JJS", "LS", "MD", "NN", "NNP", "NNPS", "NNS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR",
    "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$",
    "WRB", "``",
];

/// Bucket name for tags outside the registry.
pub const OTHER_TAG: &str = "OTHER";

/// Position of `tag` in [`PENN_TAGS`], after folding bracket aliases.
pub fn tag_index(tag: &str) -> Option<usize> {
    let tag = canonical(tag);
    PENN_TAGS.binary_search(&tag).ok()
}

fn canonical(tag: &str) -> &str {
    match tag {
        "-LRB-" | "-LCB-" | "-LSB-" => "(",
        "-RRB-" | "-RCB-" | "-RSB-" => ")",
        t => t,
    }
}

/// Tags that carry no lexical content and are skipped when matching
/// multi-word keyword phrases.
pub fn is_punctuation(xpos: &str, upos: &str) -> bool {
    upos == "PUNCT"
        || matches!(
            canonical(xpos),
            "," | "." | ":" | "``" | "''" | "(" | ")" | "HYPH" | "NFP"
        )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_sorted_and_unique() {
        let mut sorted = PENN_TAGS.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted, PENN_TAGS.to_vec());
    }

    #[test]
    fn bracket_aliases_fold() {
        assert_eq!(tag_index("-LRB-"), tag_index("("));
        assert_eq!(tag_index("-RRB-"), tag_index(")"));
        assert!(tag_index("NN").is_some());
        assert!(tag_index("_SP").is_none());
        assert!(tag_index("HYPH").is_none());
    }

    #[test]
    fn punctuation_detection() {
        assert!(is_punctuation(",", "_"));
        assert!(is_punctuation("XX", "PUNCT"));
        assert!(!is_punctuation("RB", "ADV"));
    }
}
