use scraper::{Html, Node, Selector};
use serde::{Deserialize, Serialize};

/// A textual node of an HTML page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextNode {
    /// `n<k>` where `k` is the node's position among kept nodes.
    pub id: String,
    pub text: String,
}

const SKIPPED_ELEMENTS: &[&str] = &["script", "style", "noscript", "template"];

/// Enumerate the page's text nodes in document order.
///
/// Parsing is tolerant; script/style contents, comments and whitespace-only
/// text are skipped. Node text is whitespace-normalized.
pub fn parse_html_page(raw: &str) -> Vec<TextNode> {
    let doc = Html::parse_document(raw);
    let mut nodes = Vec::new();
    for node in doc.tree.root().descendants() {
        let Node::Text(text) = node.value() else {
            continue;
        };
        let hidden = node.ancestors().any(|a| {
            a.value()
                .as_element()
                .is_some_and(|e| SKIPPED_ELEMENTS.contains(&e.name()))
        });
        if hidden {
            continue;
        }
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if normalized.is_empty() {
            continue;
        }
        nodes.push(TextNode {
            id: format!("n{}", nodes.len()),
            text: normalized,
        });
    }
    nodes
}

/// Whitespace-normalized `<title>` text, if the page has one.
pub fn page_title(raw: &str) -> Option<String> {
    let doc = Html::parse_document(raw);
    let selector = Selector::parse("title").expect("static selector");
    let title = doc.select(&selector).next()?;
    let text = title.text().collect::<Vec<_>>().join(" ");
    let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
    (!text.is_empty()).then_some(text)
}
