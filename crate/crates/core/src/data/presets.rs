//! Schemas of the six benchmark corpora.

use super::{Anchor, DataFormat, DatasetSpec, Document};

#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub format: DataFormat,
    /// Expected train/dev/test sizes after conversion.
    pub splits: [usize; 3],
    /// Empty for dependency corpora, whose labels come from the data.
    pub entity_labels: &'static [&'static str],
    pub relation_labels: &'static [&'static str],
    pub tree_structured: bool,
    pub oracle_tags: bool,
}

pub const PRESETS: [Preset; 6] = [
    Preset {
        name: "ade",
        format: DataFormat::JsonTriples,
        splits: [2563, 854, 300],
        entity_labels: &["drug", "disease"],
        relation_labels: &["adverseEffect"],
        tree_structured: false,
        oracle_tags: false,
    },
    Preset {
        name: "conll04",
        format: DataFormat::JsonTriples,
        splits: [922, 231, 288],
        entity_labels: &["per", "org", "loc"],
        relation_labels: &["workFor", "kill", "orgBasedIn", "liveIn", "locIn"],
        tree_structured: false,
        oracle_tags: false,
    },
    Preset {
        name: "scierc",
        format: DataFormat::JsonTriples,
        splits: [1366, 187, 397],
        entity_labels: &["generic", "material", "method", "metric", "otherSciTerm", "task"],
        relation_labels: &[
            "usedFor",
            "featureOf",
            "hyponymOf",
            "evaluateFor",
            "partOf",
            "compare",
            "conjunction",
        ],
        tree_structured: false,
        oracle_tags: false,
    },
    Preset {
        name: "erfgc",
        format: DataFormat::JsonTriples,
        splits: [242, 29, 29],
        entity_labels: &[
            "food",
            "tool",
            "duration",
            "quantity",
            "actionByChef",
            "discontAction",
            "actionByFood",
            "actionByTool",
            "foodState",
            "toolState",
        ],
        relation_labels: &[
            "agent",
            "target",
            "indirectObject",
            "toolComplement",
            "foodComplement",
            "foodEq",
            "foodPartOf",
            "foodSet",
            "toolEq",
            "toolPartOf",
            "actionEq",
            "timingHeadVerb",
            "other",
        ],
        tree_structured: false,
        oracle_tags: false,
    },
    Preset {
        name: "enewt",
        format: DataFormat::Conllu,
        splits: [10098, 1431, 1427],
        entity_labels: &[],
        relation_labels: &[],
        tree_structured: true,
        oracle_tags: true,
    },
    Preset {
        name: "scidtb",
        format: DataFormat::Conllu,
        splits: [2567, 814, 817],
        entity_labels: &[],
        relation_labels: &[],
        tree_structured: true,
        oracle_tags: true,
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name.eq_ignore_ascii_case(name))
}

impl Preset {
    /// Dataset spec for this corpus. Label sets of dependency corpora are
    /// collected from `docs` (pass every split).
    pub fn spec<'a>(&self, docs: impl IntoIterator<Item = &'a Document>) -> DatasetSpec {
        let mut spec = if self.entity_labels.is_empty() {
            DatasetSpec::infer(self.name, self.format, docs)
        } else {
            DatasetSpec {
                name: self.name.to_string(),
                format: self.format,
                entity_labels: self.entity_labels.iter().map(|s| s.to_string()).collect(),
                relation_labels: self.relation_labels.iter().map(|s| s.to_string()).collect(),
                tree_structured: false,
                oracle_tags: false,
                anchor: Anchor::Last,
            }
        };
        spec.tree_structured = self.tree_structured;
        spec.oracle_tags = self.oracle_tags;
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relation_presets_validate() {
        for p in PRESETS.iter().filter(|p| p.format == DataFormat::JsonTriples) {
            let spec = p.spec([]);
            spec.validate().unwrap();
            assert_eq!(spec.tag_vocab().len(), 2 * p.entity_labels.len() + 1);
        }
    }

    #[test]
    fn lookup_and_split_sizes() {
        assert_eq!(preset("CoNLL04").unwrap().splits, [922, 231, 288]);
        assert_eq!(preset("erfgc").unwrap().splits, [242, 29, 29]);
        assert!(preset("ptb").is_none());
        assert!(preset("enewt").unwrap().tree_structured);
    }
}
