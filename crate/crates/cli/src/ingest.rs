//! Corpus loading: delimiter-marked plain text, plus an optional PDF
//! adapter. The canonical corpus input is UTF-8 `.txt` with form-feed page
//! delimiters; PDFs are a convenience for working straight from source
//! documents.

use std::fs;
use std::path::{Path, PathBuf};

use regolith_core::chunk::DocumentText;

use crate::error::{AppError, AppResult};

pub const DEFAULT_PAGE_DELIMITER: char = '\u{000c}';

/// A file the loader had to skip, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestIssue {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct CorpusLoad {
    /// Documents in lexicographic doc-id order.
    pub documents: Vec<DocumentText>,
    pub issues: Vec<IngestIssue>,
}

/// Loads every recognized file under `dir` (non-recursive). Per-file
/// problems are collected as issues and loading continues; only an
/// unreadable or empty directory fails the whole corpus.
pub fn load_corpus(dir: &Path, page_delimiter: char) -> AppResult<CorpusLoad> {
    let entries = fs::read_dir(dir)
        .map_err(|err| AppError::input(format!("cannot read corpus dir {}: {err}", dir.display())))?;

    let mut paths: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();

    let mut load = CorpusLoad::default();
    let mut seen_any_recognized = false;

    for path in paths {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        let result = match ext.as_deref() {
            Some("txt") | Some("text") => {
                seen_any_recognized = true;
                load_text_document(&path, page_delimiter)
            }
            Some("pdf") => {
                seen_any_recognized = true;
                load_pdf_document(&path)
            }
            _ => continue,
        };
        match result {
            Ok(doc) => load.documents.push(doc),
            Err(message) => load.issues.push(IngestIssue { path, message }),
        }
    }

    if !seen_any_recognized {
        return Err(AppError::input(format!(
            "no corpus files (.txt/.pdf) found in {}",
            dir.display()
        )));
    }

    load.documents.sort_by(|a, b| a.doc_id().cmp(b.doc_id()));
    for pair in load.documents.windows(2) {
        if pair[0].doc_id() == pair[1].doc_id() {
            return Err(AppError::input(format!(
                "duplicate doc id {:?} in corpus (same file stem with different extensions?)",
                pair[0].doc_id()
            )));
        }
    }
    Ok(load)
}

fn doc_id_of(path: &Path) -> Result<String, String> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| "file has no usable stem for a doc id".to_owned())?;
    // doc ids flow into the records CSV and the `;`-separated provenance
    // list, so these characters cannot appear in them
    if stem.contains([',', ';', '\n', '\r']) {
        return Err(format!(
            "file stem {stem:?} contains characters reserved by the record format"
        ));
    }
    Ok(stem.to_owned())
}

fn load_text_document(path: &Path, page_delimiter: char) -> Result<DocumentText, String> {
    let doc_id = doc_id_of(path)?;
    let content = fs::read_to_string(path).map_err(|err| format!("unreadable: {err}"))?;
    if content.is_empty() {
        return Err("empty file (a document needs at least one page of text)".to_owned());
    }
    let pages: Vec<String> = content.split(page_delimiter).map(str::to_owned).collect();
    if pages.iter().all(|p| p.trim().is_empty()) {
        return Err("no extractable text (all pages empty)".to_owned());
    }
    DocumentText::new(doc_id, pages).map_err(|err| err.to_string())
}

#[cfg(feature = "pdf")]
fn load_pdf_document(path: &Path) -> Result<DocumentText, String> {
    extract_pdf_text(path).map_err(|err| match err {
        AppError::Input(msg) | AppError::Config(msg) | AppError::Endpoint(msg) => msg,
    })
}

#[cfg(not(feature = "pdf"))]
fn load_pdf_document(_path: &Path) -> Result<DocumentText, String> {
    Err("PDF support not built in (enable the `pdf` feature); convert to .txt with form-feed page breaks".to_owned())
}

/// Extracts one page-text per PDF page, in page order.
#[cfg(feature = "pdf")]
pub fn extract_pdf_text(path: &Path) -> AppResult<DocumentText> {
    let doc_id = doc_id_of(path).map_err(AppError::input)?;
    let doc = lopdf::Document::load(path)
        .map_err(|err| AppError::input(format!("{}: cannot parse PDF: {err}", path.display())))?;
    if doc.is_encrypted() {
        return Err(AppError::input(format!(
            "{}: PDF is encrypted",
            path.display()
        )));
    }
    let mut pages = Vec::new();
    for (page_number, _) in doc.get_pages() {
        let text = doc.extract_text(&[page_number]).map_err(|err| {
            AppError::input(format!(
                "{}: cannot extract text from page {page_number}: {err}",
                path.display()
            ))
        })?;
        pages.push(text);
    }
    if pages.is_empty() || pages.iter().all(|p| p.trim().is_empty()) {
        return Err(AppError::input(format!(
            "{}: zero extractable pages (empty text layer)",
            path.display()
        )));
    }
    DocumentText::new(doc_id, pages)
        .map_err(|err| AppError::input(format!("{}: {err}", path.display())))
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write_file(dir: &Path, name: &str, content: &str) {
        let mut f = fs::File::create(dir.join(name)).unwrap();
        f.write_all(content.as_bytes()).unwrap();
    }

    #[test]
    fn loads_documents_in_doc_id_order() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "12004.txt", "page one\u{000c} page two");
        write_file(dir.path(), "10047.txt", "only page");
        write_file(dir.path(), "notes.json", "{}");

        let load = load_corpus(dir.path(), DEFAULT_PAGE_DELIMITER).unwrap();
        assert!(load.issues.is_empty());
        let ids: Vec<&str> = load.documents.iter().map(|d| d.doc_id()).collect();
        assert_eq!(ids, ["10047", "12004"]);
        assert_eq!(load.documents[1].pages().len(), 2);
        assert_eq!(load.documents[1].pages()[1], " page two");
        assert_eq!(load.documents[0].pages().len(), 1);
    }

    #[test]
    fn file_without_delimiter_is_one_page() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "15555.txt", "whole document text");
        let load = load_corpus(dir.path(), DEFAULT_PAGE_DELIMITER).unwrap();
        assert_eq!(load.documents[0].pages(), ["whole document text"]);
    }

    #[test]
    fn empty_file_is_an_issue_not_a_document() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "10047.txt", "");
        write_file(dir.path(), "12004.txt", "real text");
        let load = load_corpus(dir.path(), DEFAULT_PAGE_DELIMITER).unwrap();
        assert_eq!(load.documents.len(), 1);
        assert_eq!(load.issues.len(), 1);
        assert!(load.issues[0].message.contains("empty file"));
    }

    #[test]
    fn delimiter_only_file_is_an_issue() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "10047.txt", "\u{000c}\u{000c}");
        write_file(dir.path(), "12004.txt", "real text");
        let load = load_corpus(dir.path(), DEFAULT_PAGE_DELIMITER).unwrap();
        assert_eq!(load.documents.len(), 1);
        assert!(load.issues[0].message.contains("no extractable text"));
    }

    #[test]
    fn empty_directory_is_a_corpus_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_corpus(dir.path(), DEFAULT_PAGE_DELIMITER).unwrap_err();
        assert!(matches!(err, AppError::Input(_)));

        let missing = load_corpus(&dir.path().join("nope"), DEFAULT_PAGE_DELIMITER).unwrap_err();
        assert!(matches!(missing, AppError::Input(_)));
    }

    #[test]
    fn reserved_characters_in_file_stem_are_an_issue() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "10047,v2.txt", "text");
        write_file(dir.path(), "12004.txt", "text");
        let load = load_corpus(dir.path(), DEFAULT_PAGE_DELIMITER).unwrap();
        assert_eq!(load.documents.len(), 1);
        assert!(load.issues[0].message.contains("reserved"));
    }

    #[test]
    fn custom_delimiter() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "10047.txt", "a|b|c");
        let load = load_corpus(dir.path(), '|').unwrap();
        assert_eq!(load.documents[0].pages().len(), 3);
    }

    #[cfg(feature = "pdf")]
    mod pdf {
        use super::*;
        use lopdf::content::{Content, Operation};
        use lopdf::{dictionary, Document, Object, Stream};

        fn build_pdf(page_texts: &[&str]) -> Document {
            let mut doc = Document::with_version("1.5");
            let pages_id = doc.new_object_id();
            let font_id = doc.add_object(dictionary! {
                "Type" => "Font",
                "Subtype" => "Type1",
                "BaseFont" => "Courier",
            });
            let resources_id = doc.add_object(dictionary! {
                "Font" => dictionary! { "F1" => font_id },
            });
            let mut kids: Vec<Object> = Vec::new();
            for text in page_texts {
                let content = Content {
                    operations: vec![
                        Operation::new("BT", vec![]),
                        Operation::new("Tf", vec!["F1".into(), 12.into()]),
                        Operation::new("Td", vec![100.into(), 700.into()]),
                        Operation::new("Tj", vec![Object::string_literal(*text)]),
                        Operation::new("ET", vec![]),
                    ],
                };
                let content_id = doc.add_object(Stream::new(
                    dictionary! {},
                    content.encode().unwrap(),
                ));
                let page_id = doc.add_object(dictionary! {
                    "Type" => "Page",
                    "Parent" => pages_id,
                    "Contents" => content_id,
                    "Resources" => resources_id,
                    "MediaBox" => vec![0.into(), 0.into(), 612.into(), 792.into()],
                });
                kids.push(page_id.into());
            }
            let kids_len = kids.len() as i64;
            doc.objects.insert(
                pages_id,
                Object::Dictionary(dictionary! {
                    "Type" => "Pages",
                    "Kids" => kids,
                    "Count" => kids_len,
                }),
            );
            let catalog_id = doc.add_object(dictionary! {
                "Type" => "Catalog",
                "Pages" => pages_id,
            });
            doc.trailer.set("Root", catalog_id);
            doc
        }

        #[test]
        fn three_page_pdf_yields_three_pages() {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("10047.pdf");
            build_pdf(&["page one", "page two", "page three"])
                .save(&path)
                .unwrap();
            let doc = extract_pdf_text(&path).unwrap();
            assert_eq!(doc.doc_id(), "10047");
            assert_eq!(doc.pages().len(), 3);
            assert!(doc.pages()[0].contains("page one"));
            assert!(doc.pages()[2].contains("page three"));
        }

        #[test]
        fn corrupt_pdf_is_an_error() {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("bad.pdf");
            fs::write(&path, b"%PDF-1.5 this is not really a pdf").unwrap();
            let err = extract_pdf_text(&path).unwrap_err();
            assert!(matches!(err, AppError::Input(_)));
        }

        #[test]
        fn pdf_without_text_layer_is_an_error() {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("blank.pdf");
            build_pdf(&[""]).save(&path).unwrap();
            let err = extract_pdf_text(&path).unwrap_err();
            assert!(err.to_string().contains("zero extractable pages"));
        }

        #[test]
        fn corpus_loader_picks_up_pdfs() {
            let dir = tempfile::tempdir().unwrap();
            build_pdf(&["some composition text"])
                .save(dir.path().join("15415.pdf"))
                .unwrap();
            let load = load_corpus(dir.path(), DEFAULT_PAGE_DELIMITER).unwrap();
            assert_eq!(load.documents[0].doc_id(), "15415");
        }
    }
}
