use std::fs;
use std::path::Path;

use super::{Document, NodeRef, RelationTriple};
use crate::error::{Error, Result};

pub fn read_conllu(path: &Path) -> Result<Vec<Document>> {
    parse_conllu(&fs::read_to_string(path)?)
}

struct Row {
    form: String,
    xpos: String,
    head: usize,
    deprel: String,
    line: usize,
}

#[derive(Default)]
struct Pending {
    id: Option<String>,
    text: Option<String>,
    rows: Vec<Row>,
    first_line: usize,
}

/// Parses CoNLL-U text. One document per sentence; word tags come from the
/// XPOS column and every word yields one triple `(head, deprel, word)`,
/// with the sentence root attached to [`NodeRef::Root`]. Multiword-token
/// ranges and empty nodes are skipped.
pub fn parse_conllu(input: &str) -> Result<Vec<Document>> {
    let input = input.strip_prefix('\u{feff}').unwrap_or(input);
    let mut docs = Vec::new();
    let mut cur = Pending::default();
    for (idx, raw) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if !cur.rows.is_empty() {
                docs.push(finish(std::mem::take(&mut cur), docs.len())?);
            } else {
                cur = Pending::default();
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if cur.rows.is_empty() {
                cur.first_line = line_no;
            }
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => cur.id = Some(value.trim().to_string()),
                    "text" => cur.text = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let parse_index = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid {what} {s:?}"),
            })
        };
        let id = parse_index(cols[0], "word id")?;
        if id != cur.rows.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("word id {id} out of sequence (expected {})", cur.rows.len() + 1),
            });
        }
        if cur.rows.is_empty() && cur.first_line == 0 {
            cur.first_line = line_no;
        }
        cur.rows.push(Row {
            form: cols[1].to_string(),
            xpos: cols[4].to_string(),
            head: parse_index(cols[6], "head")?,
            deprel: cols[7].to_string(),
            line: line_no,
        });
    }
    if !cur.rows.is_empty() {
        docs.push(finish(cur, docs.len())?);
    }
    Ok(docs)
}

fn finish(p: Pending, index: usize) -> Result<Document> {
    let n = p.rows.len();
    let id = p.id.unwrap_or_else(|| format!("s{}", index + 1));
    for (i, r) in p.rows.iter().enumerate() {
        if r.head > n {
            return Err(Error::Integrity(format!(
                "sentence {id}, line {}: head {} out of range 0..={n}",
                r.line, r.head
            )));
        }
        if r.head == i + 1 {
            return Err(Error::Integrity(format!(
                "sentence {id}, line {}: word is its own head",
                r.line
            )));
        }
    }
    let heads: Vec<usize> = std::iter::once(0).chain(p.rows.iter().map(|r| r.head)).collect();
    if !crate::decoder::is_valid_tree(&heads, true) {
        return Err(Error::Integrity(format!(
            "sentence {id} (line {}): heads do not form a single-rooted tree",
            p.first_line
        )));
    }
    let words: Vec<String> = p.rows.iter().map(|r| r.form.clone()).collect();
    let text = p.text.unwrap_or_else(|| words.join(" "));
    let triples = p
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| RelationTriple {
            head: if r.head == 0 {
                NodeRef::Root
            } else {
                NodeRef::Word(r.head - 1)
            },
            tail: NodeRef::Word(i),
            label: r.deprel.clone(),
        })
        .collect();
    Ok(Document {
        id,
        text,
        word_tags: Some(p.rows.iter().map(|r| r.xpos.clone()).collect()),
        words,
        entities: Vec::new(),
        triples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TOKENS: &str = "1\tDogs\tdog\tNOUN\tNNS\t_\t2\tnsubj\t_\t_\n\
                              2\tbark\tbark\tVERB\tVBP\t_\t0\troot\t_\t_\n";

    #[test]
    fn two_token_fixture() {
        let docs = parse_conllu(TWO_TOKENS).unwrap();
        assert_eq!(docs.len(), 1);
        let d = &docs[0];
        assert_eq!(d.words, vec!["Dogs", "bark"]);
        assert_eq!(d.word_tags.as_deref().unwrap(), &["NNS".to_string(), "VBP".to_string()]);
        assert_eq!(
            d.triples,
            vec![
                RelationTriple {
                    head: NodeRef::Word(1),
                    tail: NodeRef::Word(0),
                    label: "nsubj".into()
                },
                RelationTriple {
                    head: NodeRef::Root,
                    tail: NodeRef::Word(1),
                    label: "root".into()
                },
            ]
        );
        assert_eq!(d.relation_count(), 1);
        let gold = d.gold_triples();
        assert_eq!(gold.len(), 1);
        assert!(gold.contains_text("bark", "nsubj", "Dogs"));
    }

    #[test]
    fn empty_input_gives_no_documents() {
        assert!(parse_conllu("").unwrap().is_empty());
        assert!(parse_conllu("\n\n# just a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn skips_ranges_and_empty_nodes_and_reads_comments() {
        let text = "# sent_id = a-1\n# text = Don't go\n\
                    1-2\tDon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
                    1\tDo\tdo\tAUX\tVBP\t_\t3\taux\t_\t_\n\
                    2\tn't\tnot\tPART\tRB\t_\t3\tadvmod\t_\t_\n\
                    3\tgo\tgo\tVERB\tVB\t_\t0\troot\t_\t_\n\
                    3.1\tgone\tgo\tVERB\tVB\t_\t_\t_\t_\t_\n\n\
                    1\tHi\thi\tINTJ\tUH\t_\t0\troot\t_\t_\n";
        let docs = parse_conllu(text).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "a-1");
        assert_eq!(docs[0].text, "Don't go");
        assert_eq!(docs[0].words, vec!["Do", "n't", "go"]);
        assert_eq!(docs[1].id, "s2");
        assert_eq!(docs[1].relation_count(), 0);
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let text = "1\tDogs\tdog\tNOUN\tNNS\t_\t2\tnsubj\t_\t_\n2\tbark\tbark\n";
        match parse_conllu(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn head_out_of_range_is_integrity_error() {
        let text = "1\tDogs\tdog\tNOUN\tNNS\t_\t5\tnsubj\t_\t_\n\
                    2\tbark\tbark\tVERB\tVBP\t_\t0\troot\t_\t_\n";
        assert!(matches!(parse_conllu(text), Err(Error::Integrity(_))));
    }

    #[test]
    fn cycles_and_multiple_roots_are_rejected() {
        let cycle = "1\ta\ta\tX\tX\t_\t2\tdep\t_\t_\n\
                     2\tb\tb\tX\tX\t_\t1\tdep\t_\t_\n\
                     3\tc\tc\tX\tX\t_\t0\troot\t_\t_\n";
        assert!(matches!(parse_conllu(cycle), Err(Error::Integrity(_))));
        let two_roots = "1\ta\ta\tX\tX\t_\t0\troot\t_\t_\n\
                         2\tb\tb\tX\tX\t_\t0\troot\t_\t_\n";
        assert!(matches!(parse_conllu(two_roots), Err(Error::Integrity(_))));
    }
}
