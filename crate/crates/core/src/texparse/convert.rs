//! A LaTeX-subset converter: comments, preamble, floats and math are removed,
//! sectioning is kept, citations become placeholder tokens and unknown
//! macros are dropped with their argument text preserved.

use super::{cite_token, default_config, PlainDocument, Section, TexConfig, TexError};
use crate::ingest::LatexBundle;

/// Environments removed together with their content.
const DROPPED_ENVS: &[&str] = &[
    "figure", "figure*", "table", "table*", "tabular", "tabular*", "tabularx", "wrapfigure",
    "wraptable", "subfigure", "algorithm", "algorithm*", "algorithmic", "lstlisting",
    "verbatim", "Verbatim", "minted", "tikzpicture", "comment", "thebibliography", "filecontents",
    "filecontents*", "titlepage",
];

/// Display-math environments, reduced to a `[math]` placeholder.
const MATH_ENVS: &[&str] = &[
    "equation", "equation*", "align", "align*", "alignat", "alignat*", "gather", "gather*",
    "multline", "multline*", "eqnarray", "eqnarray*", "displaymath", "math", "flalign", "flalign*",
];

const LIST_ENVS: &[&str] = &["itemize", "enumerate", "description", "list"];

const SECTION_CMDS: &[&str] = &["part", "chapter", "section", "subsection", "subsubsection"];

/// Commands dropped together with all their immediately following arguments.
const DROP_WITH_ARGS: &[&str] = &[
    "label", "includegraphics", "vspace", "hspace", "bibliographystyle", "bibliography",
    "addbibresource", "usepackage", "documentclass", "newcommand", "renewcommand",
    "providecommand", "newenvironment", "renewenvironment", "setlength", "setcounter",
    "addtolength", "pagestyle", "thispagestyle", "nocite", "input", "include", "author",
    "title", "date", "affiliation", "affil", "email", "thanks", "address", "institute",
    "keywords", "acknowledgments", "markboth", "definecolor", "hypersetup", "graphicspath",
    "newtheorem", "DeclareMathOperator", "caption", "newlength", "linespread", "fontsize",
    "icmltitle", "icmlauthor", "icmlaffiliation", "icmlcorrespondingauthor", "icmlkeywords",
];

const REF_CMDS: &[&str] = &["ref", "eqref", "autoref", "cref", "Cref", "pageref", "nameref"];

pub const MATH_PLACEHOLDER: &str = "[math]";
pub const REF_PLACEHOLDER: &str = "[ref]";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversion {
    pub document: PlainDocument,
    /// Recoverable problems, e.g. unbalanced braces.
    pub warnings: Vec<String>,
}

/// Convert a bundle's main source. Never fails on malformed input: problems
/// are reported as warnings and the best-effort result is returned.
pub fn to_plain_text(bundle: &LatexBundle) -> Result<Conversion, TexError> {
    to_plain_text_with(bundle, default_config())
}

pub fn to_plain_text_with(bundle: &LatexBundle, config: &TexConfig) -> Result<Conversion, TexError> {
    if bundle.main_source.trim().is_empty() {
        return Err(TexError::EmptySource);
    }
    let source = strip_comments(&bundle.main_source);
    let body = document_body(&source);
    let mut converter = Converter::new(config);
    converter.run(body);
    let (sections, warnings) = converter.finish();
    Ok(Conversion {
        document: PlainDocument {
            source_id: bundle.arxiv_id.clone(),
            sections,
        },
        warnings,
    })
}

/// Convert a LaTeX fragment (a title, a bibliography item) to one line of text.
pub fn inline_text(fragment: &str) -> String {
    let mut converter = Converter::new(default_config());
    converter.run(&strip_comments(fragment));
    let (sections, _) = converter.finish();
    let joined = sections
        .into_iter()
        .flat_map(|s| {
            let heading = (!s.heading.is_empty()).then_some(s.heading);
            heading.into_iter().chain(s.paragraphs)
        })
        .collect::<Vec<_>>()
        .join(" ");
    tidy(&joined)
}

/// Remove `%` comments. Whole-line comments vanish with their newline so they
/// never introduce a paragraph break.
pub(crate) fn strip_comments(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    for line in src.split_inclusive('\n') {
        let (code, had_comment) = match comment_start(line) {
            Some(i) => (&line[..i], true),
            None => (line, false),
        };
        if had_comment {
            if code.trim().is_empty() {
                continue;
            }
            out.push_str(code);
            out.push('\n');
        } else {
            out.push_str(code);
        }
    }
    out
}

fn comment_start(line: &str) -> Option<usize> {
    let mut backslashes = 0;
    for (i, b) in line.bytes().enumerate() {
        match b {
            b'\\' => backslashes += 1,
            b'%' if backslashes % 2 == 0 => return Some(i),
            _ => backslashes = 0,
        }
    }
    None
}

fn document_body(src: &str) -> &str {
    match src.find("\\begin{document}") {
        Some(start) => {
            let body = &src[start + "\\begin{document}".len()..];
            match body.find("\\end{document}") {
                Some(end) => &body[..end],
                None => body,
            }
        }
        None => src,
    }
}

/// Collapse whitespace and drop spaces left in front of punctuation by
/// removed commands.
fn tidy(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut out = String::with_capacity(collapsed.len());
    let mut chars = collapsed.chars().peekable();
    while let Some(c) = chars.next() {
        if c == ' ' {
            if let Some(&next) = chars.peek() {
                if matches!(next, '.' | ',' | ';' | ':' | '!' | '?' | ')') {
                    continue;
                }
            }
        }
        out.push(c);
    }
    out.trim().to_string()
}

struct Converter<'c> {
    config: &'c TexConfig,
    sections: Vec<Section>,
    heading: Option<String>,
    paragraphs: Vec<String>,
    buf: String,
    warnings: Vec<String>,
    /// When set, the next text opens a fresh untitled section.
    section_closed: bool,
}

/// A byte cursor over LaTeX source.
struct Cursor<'s> {
    src: &'s str,
    pos: usize,
}

impl<'s> Cursor<'s> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn rest(&self) -> &'s str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_spaces(&mut self) {
        while let Some(c) = self.peek() {
            if c == ' ' || c == '\t' || c == '\n' && !self.rest()[1..].trim_start_matches([' ', '\t']).starts_with('\n') {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    /// Command name after a backslash: a run of letters, or one other char.
    fn command_name(&mut self) -> &'s str {
        let start = self.pos;
        let letters = self.rest().chars().take_while(|c| c.is_ascii_alphabetic()).count();
        if letters > 0 {
            self.pos += letters;
        } else if let Some(c) = self.peek() {
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    /// Read a `{...}` group. Returns `(content, balanced)`, or `None` if the
    /// next non-space char is not `{`.
    fn group(&mut self) -> Option<(&'s str, bool)> {
        let save = self.pos;
        self.skip_spaces();
        if !self.eat('{') {
            self.pos = save;
            return None;
        }
        Some(self.until_close('{', '}'))
    }

    /// Read a `[...]` optional argument.
    fn optional(&mut self) -> Option<&'s str> {
        let save = self.pos;
        self.skip_spaces();
        if !self.eat('[') {
            self.pos = save;
            return None;
        }
        Some(self.until_close('[', ']').0)
    }

    fn until_close(&mut self, open: char, close: char) -> (&'s str, bool) {
        let start = self.pos;
        let mut depth = 1usize;
        let mut brace_depth = 0usize;
        while let Some(c) = self.bump() {
            match c {
                '\\' => {
                    self.bump();
                }
                '{' if open != '{' => brace_depth += 1,
                '}' if open != '{' => brace_depth = brace_depth.saturating_sub(1),
                c if c == open => depth += 1,
                c if c == close && brace_depth == 0 => {
                    depth -= 1;
                    if depth == 0 {
                        return (&self.src[start..self.pos - c.len_utf8()], true);
                    }
                }
                _ => {}
            }
        }
        (&self.src[start..], false)
    }

    /// Skip optional and brace arguments directly following a command.
    fn skip_args(&mut self) {
        loop {
            let save = self.pos;
            while matches!(self.peek(), Some(' ' | '\t')) {
                self.bump();
            }
            match self.peek() {
                Some('[') => {
                    self.bump();
                    self.until_close('[', ']');
                }
                Some('{') => {
                    self.bump();
                    self.until_close('{', '}');
                }
                Some('\\') if self.rest()[1..].starts_with(|c: char| c.is_ascii_alphabetic()) => {
                    // \newcommand\foo{...} style: the macro being defined
                    let before = self.pos;
                    self.bump();
                    let name = self.command_name();
                    if name.is_empty() {
                        self.pos = before;
                        break;
                    }
                    // only consume a bare command if an argument follows
                    if !matches!(self.peek(), Some('[' | '{')) {
                        self.pos = save;
                        break;
                    }
                }
                _ => {
                    self.pos = save;
                    break;
                }
            }
        }
    }

    /// Skip to the `\end{env}` matching an already-consumed `\begin{env}`.
    fn skip_env(&mut self, env: &str) -> bool {
        let begin = format!("\\begin{{{env}}}");
        let end = format!("\\end{{{env}}}");
        let mut depth = 1;
        loop {
            let rest = self.rest();
            let next_end = rest.find(&end);
            let next_begin = rest.find(&begin);
            match (next_begin, next_end) {
                (Some(b), Some(e)) if b < e => {
                    depth += 1;
                    self.pos += b + begin.len();
                }
                (_, Some(e)) => {
                    depth -= 1;
                    self.pos += e + end.len();
                    if depth == 0 {
                        return true;
                    }
                }
                _ => {
                    self.pos = self.src.len();
                    return false;
                }
            }
        }
    }

    fn skip_until(&mut self, marker: &str) -> bool {
        match self.rest().find(marker) {
            Some(i) => {
                self.pos += i + marker.len();
                true
            }
            None => {
                self.pos = self.src.len();
                false
            }
        }
    }
}

impl<'c> Converter<'c> {
    fn new(config: &'c TexConfig) -> Self {
        Self {
            config,
            sections: Vec::new(),
            heading: None,
            paragraphs: Vec::new(),
            buf: String::new(),
            warnings: Vec::new(),
            section_closed: false,
        }
    }

    fn text(&mut self, s: &str) {
        if self.section_closed && !s.trim().is_empty() {
            self.section_closed = false;
            self.start_section(String::new());
        }
        self.buf.push_str(s);
    }

    fn par_break(&mut self) {
        let paragraph = tidy(&self.buf);
        self.buf.clear();
        if !paragraph.is_empty() {
            if self.heading.is_none() {
                self.heading = Some(String::new());
            }
            self.paragraphs.push(paragraph);
        }
    }

    fn flush_section(&mut self) {
        self.par_break();
        if let Some(heading) = self.heading.take() {
            let paragraphs = std::mem::take(&mut self.paragraphs);
            if !heading.is_empty() || !paragraphs.is_empty() {
                self.sections.push(Section { heading, paragraphs });
            }
        }
    }

    fn start_section(&mut self, heading: String) {
        self.flush_section();
        self.heading = Some(heading);
    }

    fn finish(mut self) -> (Vec<Section>, Vec<String>) {
        self.flush_section();
        (self.sections, self.warnings)
    }

    /// Convert a fragment to a single string (headings, item labels).
    fn fragment(&mut self, src: &str) -> String {
        let mut sub = Converter::new(self.config);
        sub.run(src);
        let (sections, warnings) = sub.finish();
        self.warnings.extend(warnings);
        let text = sections
            .into_iter()
            .flat_map(|s| {
                let heading = (!s.heading.is_empty()).then_some(s.heading);
                heading.into_iter().chain(s.paragraphs)
            })
            .collect::<Vec<_>>()
            .join(" ");
        tidy(&text)
    }

    fn unbalanced(&mut self, what: &str) {
        self.warnings
            .push(format!("UnbalancedBraces: unterminated {what}; recovered to end of input"));
    }

    fn run(&mut self, src: &str) {
        let mut cur = Cursor { src, pos: 0 };
        while let Some(c) = cur.bump() {
            match c {
                '\\' => self.command(&mut cur),
                '{' | '}' => {}
                '$' => {
                    let display = cur.eat('$');
                    let closed = if display {
                        cur.skip_until("$$")
                    } else {
                        skip_inline_math(&mut cur)
                    };
                    if !closed {
                        self.unbalanced("math");
                    }
                    self.text(MATH_PLACEHOLDER);
                }
                '~' => self.text(" "),
                '\n' => {
                    let rest = cur.rest().trim_start_matches([' ', '\t', '\r']);
                    if rest.starts_with('\n') {
                        self.par_break();
                    } else {
                        self.text(" ");
                    }
                }
                '`' if cur.eat('`') => self.text("\""),
                '\'' if cur.eat('\'') => self.text("\""),
                '-' if cur.rest().starts_with("--") => {
                    cur.bump();
                    cur.bump();
                    self.text("—");
                }
                '-' if cur.eat('-') => self.text("–"),
                c => {
                    let mut tmp = [0u8; 4];
                    self.text(c.encode_utf8(&mut tmp));
                }
            }
        }
    }

    fn command(&mut self, cur: &mut Cursor<'_>) {
        let name = cur.command_name();
        match name {
            "" => {}
            "\\" => {
                cur.optional();
                self.text(" ");
            }
            "%" | "&" | "#" | "_" | "$" | "{" | "}" => self.text(name),
            " " | "," | ";" | ":" | ">" => self.text(" "),
            "!" | "-" | "@" | "/" | "'" | "\"" | "`" | "^" | "~" | "=" | "." => {}
            "(" => {
                if !cur.skip_until("\\)") {
                    self.unbalanced("inline math");
                }
                self.text(MATH_PLACEHOLDER);
            }
            "[" => {
                if !cur.skip_until("\\]") {
                    self.unbalanced("display math");
                }
                self.text(MATH_PLACEHOLDER);
            }
            "iffalse" => {
                cur.skip_until("\\fi");
            }
            "begin" => self.begin_env(cur),
            "end" => {
                let env = cur.group().map(|(e, _)| e.trim()).unwrap_or("");
                if env == "abstract" {
                    self.par_break();
                    self.flush_section();
                    self.section_closed = true;
                } else if LIST_ENVS.contains(&env) {
                    self.par_break();
                }
            }
            "item" => {
                self.par_break();
                if let Some(label) = cur.optional() {
                    let label = self.fragment(label);
                    self.text(&label);
                    self.text(" ");
                }
            }
            "paragraph" | "subparagraph" => {
                cur.eat('*');
                cur.optional();
                self.par_break();
                if let Some((arg, balanced)) = cur.group() {
                    if !balanced {
                        self.unbalanced("paragraph heading");
                    }
                    let title = self.fragment(arg);
                    if !title.is_empty() {
                        self.text(&title);
                        if !title.ends_with(['.', '?', '!', ':']) {
                            self.text(".");
                        }
                        self.text(" ");
                    }
                }
            }
            "url" | "nolinkurl" => {
                if let Some((arg, _)) = cur.group() {
                    self.text(arg);
                }
            }
            "href" => {
                cur.group();
            }
            "footnote" | "footnotetext" => {
                cur.optional();
                if let Some((arg, balanced)) = cur.group() {
                    if !balanced {
                        self.unbalanced("footnote");
                    }
                    self.text(" ");
                    self.run(arg);
                    self.text(" ");
                }
            }
            n if SECTION_CMDS.contains(&n) => {
                cur.eat('*');
                cur.optional();
                match cur.group() {
                    Some((arg, balanced)) => {
                        if !balanced {
                            self.unbalanced("section heading");
                        }
                        let heading = self.fragment(arg);
                        self.section_closed = false;
                        self.start_section(heading);
                    }
                    None => self.start_section(String::new()),
                }
            }
            n if self.config.is_cite_command(n) => {
                cur.eat('*');
                cur.optional();
                cur.optional();
                if let Some((keys, balanced)) = cur.group() {
                    if !balanced {
                        self.unbalanced("citation");
                    }
                    let tokens: Vec<String> = keys
                        .split(',')
                        .map(str::trim)
                        .filter(|k| !k.is_empty())
                        .map(cite_token)
                        .collect();
                    self.text(&tokens.join(" "));
                }
            }
            n if REF_CMDS.contains(&n) => {
                cur.eat('*');
                cur.group();
                self.text(REF_PLACEHOLDER);
            }
            n if DROP_WITH_ARGS.contains(&n) => {
                cur.eat('*');
                cur.skip_args();
            }
            "def" | "gdef" | "edef" | "xdef" => {
                // \def\name#1#2{body}
                cur.bump();
                cur.command_name();
                while let Some(c) = cur.peek() {
                    if c == '{' {
                        break;
                    }
                    cur.bump();
                }
                cur.group();
            }
            _ => {
                // unknown macro: dropped, its brace content is kept
                cur.eat('*');
                while cur.rest().starts_with('[') {
                    cur.optional();
                }
            }
        }
    }

    fn begin_env(&mut self, cur: &mut Cursor<'_>) {
        let Some((env, _)) = cur.group() else { return };
        let env = env.trim();
        if DROPPED_ENVS.contains(&env) {
            if !cur.skip_env(env) {
                self.unbalanced(&format!("environment {env}"));
            }
        } else if MATH_ENVS.contains(&env) {
            if !cur.skip_env(env) {
                self.unbalanced(&format!("environment {env}"));
            }
            self.text(" ");
            self.text(MATH_PLACEHOLDER);
            self.text(" ");
        } else if env == "abstract" {
            self.start_section("Abstract".to_string());
            self.section_closed = false;
        } else if LIST_ENVS.contains(&env) {
            self.par_break();
            cur.optional();
        } else {
            // environment arguments such as minipage widths
            cur.optional();
            if matches!(env, "minipage" | "multicols" | "tcolorbox" | "adjustbox") {
                cur.group();
            }
        }
    }
}

fn skip_inline_math(cur: &mut Cursor<'_>) -> bool {
    while let Some(c) = cur.bump() {
        match c {
            '\\' => {
                cur.bump();
            }
            '$' => return true,
            _ => {}
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn convert(src: &str) -> Conversion {
        to_plain_text(&LatexBundle::from_source("test", src)).unwrap()
    }

    fn sections(src: &str) -> Vec<(String, Vec<String>)> {
        convert(src)
            .document
            .sections
            .into_iter()
            .map(|s| (s.heading, s.paragraphs))
            .collect()
    }

    #[test]
    fn multi_key_cite_expands_per_key() {
        assert_eq!(
            sections("\\section{Intro} Hello \\cite{a,b}."),
            vec![("Intro".to_string(), vec!["Hello ⟨cite:a⟩ ⟨cite:b⟩.".to_string()])]
        );
    }

    #[test]
    fn empty_body_yields_no_sections() {
        let src = "\\documentclass{article}\n\\usepackage{x}\n\\title{T}\n\\begin{document}\n\\end{document}\n";
        assert!(convert(src).document.sections.is_empty());
    }

    #[test]
    fn commented_citations_vanish() {
        let doc = convert("\\begin{document}\nText.\n% \\cite{ghost}\nMore \\cite{real}.\n\\end{document}")
            .document;
        let text = doc.to_text();
        assert!(!text.contains("ghost"));
        assert!(text.contains("⟨cite:real⟩"));
        // the whole-line comment did not split the paragraph
        assert_eq!(doc.sections[0].paragraphs.len(), 1);
    }

    #[test]
    fn escaped_percent_is_not_a_comment() {
        let doc = convert("We gain 5\\% accuracy \\citep[see][p.~3]{k1}.").document;
        assert_eq!(doc.sections[0].paragraphs[0], "We gain 5% accuracy ⟨cite:k1⟩.");
    }

    #[test]
    fn floats_and_math_are_removed() {
        let src = r"\section{M}
We minimise $f(x)$ below.
\begin{equation} a = b \end{equation}
\begin{figure}\caption{A caption \cite{fig}}\end{figure}
Done.";
        let paragraphs = &convert(src).document.sections[0].paragraphs;
        assert_eq!(paragraphs.len(), 1);
        assert_eq!(paragraphs[0], "We minimise [math] below. [math] Done.");
    }

    #[test]
    fn unknown_macros_keep_argument_text() {
        let doc = convert("\\textbf{Bold} and \\emph{it} \\newterm[x]{term}\\label{l} see \\ref{s}.").document;
        assert_eq!(doc.sections[0].paragraphs[0], "Bold and it term see [ref].");
    }

    #[test]
    fn paragraphs_split_on_blank_lines_and_abstract_is_a_section() {
        let src = r"\begin{document}
\begin{abstract}
Abstract text.
\end{abstract}
Lead paragraph.

\section{Intro}
First.

Second \citet{x}.
\subsection*{Detail}
Third.
\end{document}";
        let got = sections(src);
        assert_eq!(got.len(), 4);
        assert_eq!(got[0], ("Abstract".into(), vec!["Abstract text.".into()]));
        assert_eq!(got[1], ("".into(), vec!["Lead paragraph.".into()]));
        assert_eq!(got[2], ("Intro".into(), vec!["First.".into(), "Second ⟨cite:x⟩.".into()]));
        assert_eq!(got[3], ("Detail".into(), vec!["Third.".into()]));
    }

    #[test]
    fn unbalanced_braces_warn_but_recover() {
        let conv = convert("\\section{Broken heading\nText \\cite{a}");
        assert!(conv.warnings.iter().any(|w| w.starts_with("UnbalancedBraces")));
        assert_eq!(conv.document.sections.len(), 1);
    }

    #[test]
    fn no_control_sequences_survive() {
        let src = r"\section{S}\noindent Some \textit{text} with \LaTeX{} and \foo\bar{baz} \\ line \cite*{q}.";
        for p in convert(src).document.paragraphs() {
            assert!(!p.contains('\\'), "{p}");
        }
    }

    #[test]
    fn inline_text_of_fragment() {
        assert_eq!(inline_text("{A} \\emph{Study} of {BERT}"), "A Study of BERT");
    }
}
