#!/usr/bin/env python3
"""Regenerate the hermetic fixture corpus under fixtures/.

Everything here is synthetic and deterministic: upstream responses are built
in the arXiv Atom and Semantic Scholar JSON wire formats, LaTeX sources are
assembled from sentence banks, and the ground-truth file is constructed to a
fixed per-year distribution. Re-running the script produces identical bytes.

    python3 scripts/make_fixtures.py
"""
import gzip
import hashlib
import io
import json
import random
import statistics
import tarfile
from pathlib import Path
from urllib.parse import urlencode

ROOT = Path(__file__).resolve().parent.parent / "fixtures"
S2 = "https://api.semanticscholar.org"
ARXIV_QUERY = "http://export.arxiv.org/api/query"
ARXIV_SOURCE = "https://arxiv.org/e-print"
FIELDS = "paperId,externalIds,title,abstract,authors,year,venue,url,citationCount"

FIRST = ["Ana", "Bo", "Chen", "Dara", "Eli", "Farah", "Goran", "Hana", "Ivo", "Jun", "Kai", "Lena",
         "Mina", "Nils", "Omar", "Pia", "Quinn", "Rosa", "Sami", "Tara", "Uma", "Vik", "Wen", "Yara"]
LAST = ["Abe", "Brandt", "Costa", "Dietz", "Ekström", "Ferreira", "Gupta", "Horvat", "Ito", "Jansen",
        "Kowalski", "Laine", "Moreau", "Nakamura", "Okafor", "Petrov", "Quist", "Rossi", "Sato", "Tanaka",
        "Urban", "Varga", "Weber", "Yilmaz"]
VENUES = ["NeurIPS", "ICML", "ICLR", "ACL", "EMNLP", "KDD", "WWW", "AAAI", "TACL", "JMLR"]


def s2_id(seed):
    return hashlib.sha1(seed.encode()).hexdigest()


def authors(rng, n=None):
    n = n or rng.randint(2, 4)
    return [f"{rng.choice(FIRST)} {rng.choice(LAST)}" for _ in range(n)]


def write(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, (dict, list)):
        data = json.dumps(data, indent=2, ensure_ascii=False) + "\n"
    if isinstance(data, str):
        data = data.encode()
    path.write_bytes(data)


def tar_bytes(files):
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w:gz", format=tarfile.USTAR_FORMAT) as tf:
        for name in sorted(files):
            data = files[name].encode()
            info = tarfile.TarInfo(name)
            info.size = len(data)
            info.mtime = 1704067200
            info.mode = 0o644
            info.uname = info.gname = ""
            tf.addfile(info, io.BytesIO(data))
    # gzip header carries an mtime; rewrite it for reproducibility
    raw = buf.getvalue()
    return raw[:4] + b"\x00\x00\x00\x00" + raw[8:]


def gz_bytes(text):
    return gzip.compress(text.encode(), mtime=0)


# ---------------------------------------------------------------- topics

class Topic:
    def __init__(self, name, nouns, methods, tasks, datasets, metrics):
        self.name, self.nouns, self.methods = name, nouns, methods
        self.tasks, self.datasets, self.metrics = tasks, datasets, metrics


ROUTING = Topic(
    "routing",
    ["graph transformers", "sparse attention", "message passing", "node embeddings", "citation graphs",
     "neighbourhood sampling", "long-range dependencies", "token routing"],
    ["learned routing", "top-k neighbour selection", "mixture of experts", "locality-sensitive hashing",
     "hierarchical pooling", "low-rank attention", "graph rewiring", "positional encodings"],
    ["node classification", "link prediction", "graph regression", "citation recommendation"],
    ["Cora", "PubMed", "ogbn-arxiv", "ogbn-papers100M", "Citeseer", "OGB-LSC"],
    ["accuracy", "mean reciprocal rank", "throughput", "memory footprint"],
)

CLAIMS = Topic(
    "claims",
    ["scientific claims", "evidence retrieval", "contrastive pretraining", "sentence encoders",
     "claim verification", "rationale selection", "biomedical abstracts", "label noise"],
    ["contrastive learning", "hard negative mining", "domain-adaptive pretraining", "cross-encoders",
     "dense retrieval", "data augmentation", "multi-task training", "distillation"],
    ["claim verification", "evidence retrieval", "stance detection", "fact checking"],
    ["SciFact", "HealthVer", "COVID-Fact", "FEVER", "Climate-FEVER", "PubHealth"],
    ["label accuracy", "F1", "recall at 10", "calibration error"],
)


def related_title(rng, topic, i):
    patterns = [
        "{M} for {T}",
        "Scaling {N} with {M}",
        "On the Limits of {N} in {T}",
        "Revisiting {M} for {N}",
        "{N}: A Study of {M}",
        "Efficient {T} via {M}",
        "Towards Robust {T} with {N}",
        "Understanding {N} through {M}",
    ]
    p = patterns[i % len(patterns)]
    return p.format(M=rng.choice(topic.methods).title(), N=rng.choice(topic.nouns).title(),
                    T=rng.choice(topic.tasks).title())


def related_abstract(rng, topic, title):
    n1, n2 = rng.sample(topic.nouns, 2)
    m1, m2 = rng.sample(topic.methods, 2)
    t = rng.choice(topic.tasks)
    d = rng.choice(topic.datasets)
    met = rng.choice(topic.metrics)
    bg = rng.choice([
        f"Progress in {t} depends on how well models handle {n1}.",
        f"Existing approaches to {t} struggle with {n1} at scale.",
        f"{n1.capitalize()} remain a bottleneck for {t}.",
    ])
    bg2 = rng.choice([
        f"Prior methods based on {m2} are costly and brittle.",
        f"Standard {m2} ignores the structure of {n2}.",
        "",
    ])
    tg = rng.choice([
        f"We propose {title.lower()}, which combines {m1} with {n2}.",
        f"We introduce a method that uses {m1} to improve {n2}.",
        f"In this work we study {m1} as a replacement for {m2}.",
    ])
    ev = f"Experiments on {d} show gains in {met} over strong baselines."
    return " ".join(x for x in [bg, bg2, tg, ev] if x)


def make_pool(rng, topic, n, year_lo=2017, year_hi=2025, seed_tag=""):
    out = []
    for i in range(n):
        title = related_title(rng, topic, i + rng.randint(0, 7))
        # keep titles unique within a pool
        while any(p["title"] == title for p in out):
            title = related_title(rng, topic, rng.randint(0, 99))
        out.append({
            "paperId": s2_id(seed_tag + title),
            "externalIds": {"DOI": f"10.5555/{s2_id(title)[:8]}"},
            "title": title,
            "abstract": related_abstract(rng, topic, title),
            "authors": [{"name": a} for a in authors(rng)],
            "year": rng.randint(year_lo, year_hi),
            "venue": rng.choice(VENUES),
            "url": f"https://www.semanticscholar.org/paper/{s2_id(seed_tag + title)}",
            "citationCount": rng.randint(0, 900),
        })
    return out


# ---------------------------------------------------------------- LaTeX papers

POSITIVE_CITE = [
    "We build on the {M} formulation of {C}.",
    "Our encoder follows the design popularised by {C} for {N}.",
    "{C} showed that {M} scales well on {D}, which motivates our setup.",
    "As demonstrated by {C}, {N} benefit from {M}.",
    "We adopt the evaluation protocol of {C} for {T}.",
    "The strong results of {C} on {D} confirm that {M} is a sound foundation.",
]
NEGATIVE_CITE = [
    "Unlike {C}, we do not require {M} at training time.",
    "However, {C} fails to handle {N} beyond a few hundred nodes.",
    "The approach of {C} suffers from quadratic memory in {N}.",
    "In contrast to {C}, our method keeps {N} sparse throughout.",
    "{C} is limited to small graphs, whereas we target {D}.",
]
FILLER = [
    "The {N} we consider are large and heterogeneous.",
    "This setting is common in {T} and raises practical concerns about {MET}.",
    "Each layer combines {M} with a residual connection.",
    "We train all models with the same budget to keep comparisons fair.",
    "The resulting representation is passed to a linear classifier for {T}.",
    "Table~\\ref{{tab:main}} summarises the configuration used for {D}.",
    "We observe that {M} reduces the cost of {N} by roughly $3\\times$ in our runs.",
    "The hidden size is $d=256$ and we use $L=4$ layers throughout.",
    "Results on {D} follow the same trend as the main benchmark.",
    "The ablation removes {M} while keeping the rest of the model fixed.",
    "Our experiments evaluate {T} on {D} and report {MET}.",
    "The method uses {M} to select a small set of neighbours for every node.",
]


def fill(rng, topic, template, cite=None):
    return template.format(
        C=cite or "",
        M=rng.choice(topic.methods),
        N=rng.choice(topic.nouns),
        T=rng.choice(topic.tasks),
        D=rng.choice(topic.datasets),
        MET=rng.choice(topic.metrics),
    )


def cite_cmd(rng, keys, textual):
    if textual:
        return "\\citet{" + ",".join(keys) + "}"
    return rng.choice(["\\cite", "\\citep", "\\cite"]) + "{" + ",".join(keys) + "}"


def paragraphs(rng, topic, keys, n_par, per_par, negative_keys):
    """Paragraphs of filler with citation sentences for `keys` spread in."""
    queue = list(keys)
    out = []
    for _ in range(n_par):
        sents = []
        for _ in range(per_par):
            if queue and rng.random() < 0.45:
                k = queue.pop(0)
                multi = [k]
                if queue and rng.random() < 0.2:
                    multi.append(queue.pop(0))
                bank = NEGATIVE_CITE if k in negative_keys else POSITIVE_CITE
                t = rng.choice(bank)
                textual = t.startswith("{C}") or "of {C}" in t or "by {C}" in t
                c = cite_cmd(rng, multi, textual)
                sents.append(fill(rng, topic, t, c))
            else:
                sents.append(fill(rng, topic, rng.choice(FILLER)))
        out.append(" ".join(sents))
    while queue:
        k = queue.pop(0)
        bank = NEGATIVE_CITE if k in negative_keys else POSITIVE_CITE
        out[-1] += " " + fill(rng, topic, bank[0], cite_cmd(rng, [k], False))
    return out


def bib_entry(key, rec):
    authors_ = " and ".join(a["name"] for a in rec["authors"])
    return (f"@inproceedings{{{key},\n  title = {{{rec['title']}}},\n  author = {{{authors_}}},\n"
            f"  booktitle = {{{rec['venue']}}},\n  year = {{{rec['year']}}}\n}}\n")


def key_for(rec):
    last = rec["authors"][0]["name"].split()[-1].lower()
    last = "".join(c for c in last if c.isascii() and c.isalpha()) or "anon"
    word = "".join(c for c in rec["title"].split()[0].lower() if c.isalpha())
    return f"{last}{rec['year']}{word}"


def paper_a(rng):
    topic = ROUTING
    title = "Sparse Routing Transformers for Citation Graphs"
    abstract = (
        "Graph transformers capture long-range dependencies in citation graphs, but dense attention "
        "over all nodes is prohibitively expensive on large graphs. Existing sparse variants fix the "
        "attention pattern in advance and ignore the structure of the graph. We propose Sparse Routing "
        "Transformers, which learn to route each node to a small set of informative neighbours using "
        "top-k neighbour selection. Experiments on ogbn-arxiv and ogbn-papers100M show that our method "
        "matches dense attention accuracy while reducing memory by a factor of four."
    )
    refs = make_pool(rng, topic, 30, 2015, 2023, "A")
    cited = refs[:24]          # appear in refs.bib
    keys = [key_for(r) for r in cited]
    assert len(set(keys)) == len(keys)
    negative = set(keys[1::4])
    intro_keys, method_keys, exp_keys, rel_keys = keys[:6], keys[6:12], keys[12:16], keys[16:22]
    ghost = keys[22:24]        # only cited inside comments

    intro = ["\\section{Introduction}\n\\label{sec:intro}"]
    intro += paragraphs(rng, topic, intro_keys, 8, 7, negative)
    intro.append("We propose Sparse Routing Transformers, a graph transformer that learns which "
                 "neighbours each node should attend to. Our contributions are a differentiable "
                 "routing layer, a memory analysis of sparse attention on citation graphs, and "
                 "experiments on two large benchmarks.")
    intro.append("% TODO: cite the older survey \\cite{" + ghost[0] + "} once we decide on framing.")
    method = ["\\section{Method}"]
    method.append("\\subsection{Routing layer}")
    method += paragraphs(rng, topic, method_keys[:3], 8, 7, negative)
    method.append("\\begin{equation}\n  r_i = \\mathrm{topk}(q_i K^\\top / \\sqrt{d})\n\\end{equation}")
    method.append("The routing layer uses a learned scoring function to select the top-k neighbours "
                  "of each node, and attention is computed only over the selected set.")
    method.append("\\subsection{Training objective}")
    method += paragraphs(rng, topic, method_keys[3:], 8, 7, negative)
    method.append("\\begin{figure}[t]\n\\centering\n\\includegraphics[width=\\linewidth]{fig/routing.pdf}\n"
                  "\\caption{Routing in action \\cite{" + method_keys[0] + "}.}\n\\end{figure}")
    exps = ["\\section{Experiments}"]
    exps.append("We evaluate Sparse Routing Transformers on ogbn-arxiv and ogbn-papers100M for node "
                "classification. Our method matches the accuracy of dense attention while using a quarter "
                "of the memory.")
    exps += paragraphs(rng, topic, exp_keys, 10, 7, negative)
    exps.append("\\begin{table}[t]\n\\centering\n\\begin{tabular}{lcc}\nModel & Acc & Mem \\\\\n"
                "Dense & 72.1 & 4.0 \\\\\nOurs & 72.3 & 1.0\n\\end{tabular}\n\\caption{Main results.}"
                "\\label{tab:main}\n\\end{table}")
    exps.append("An ablation without learned routing loses 1.8 points of accuracy, which shows that the "
                "routing decisions matter.")
    related = ["\\section{Related Work}"]
    related += paragraphs(rng, topic, rel_keys, 8, 7, negative)
    related.append("% \\citep{" + ghost[1] + "} is related but unpublished.")
    concl = ["\\section{Conclusion}",
             "We presented a sparse routing mechanism for graph transformers on citation graphs. "
             "Future work will study dynamic graphs."]

    main = "\n".join([
        "\\documentclass{article}",
        "\\usepackage{amsmath,graphicx,natbib}",
        "% Preamble macros are dropped by the converter.",
        "\\newcommand{\\ours}{SRT}",
        f"\\title{{{title}}}",
        "\\begin{document}",
        "\\maketitle",
        "\\begin{abstract}",
        abstract,
        "\\end{abstract}",
        "\\input{sections/intro}",
        "\\input{sections/method}",
        "\\input{sections/experiments}",
        "\\include{sections/related}",
        "\\section{Conclusion}",
        concl[1],
        "\\bibliographystyle{plainnat}",
        "\\bibliography{refs}",
        "\\end{document}",
        "",
    ])
    files = {
        "main.tex": main,
        "sections/intro.tex": "\n\n".join(intro) + "\n",
        "sections/method.tex": "\n\n".join(method) + "\n",
        "sections/experiments.tex": "\n\n".join(exps) + "\n",
        "sections/related.tex": "\n\n".join(related) + "\n",
        "refs.bib": "\n".join(bib_entry(k, r) for k, r in zip(keys, cited)),
    }
    return {
        "arxiv_id": "2401.01234", "title": title, "abstract": abstract, "year": 2024,
        "venue": "arXiv", "authors": ["Lena Weber", "Kai Tanaka", "Omar Okafor"],
        "refs": refs, "source": tar_bytes(files), "topic": topic,
    }


def paper_b(rng):
    topic = CLAIMS
    title = "Contrastive Pretraining for Scientific Claim Verification"
    abstract = (
        "Verifying scientific claims requires retrieving evidence from research abstracts and judging "
        "whether it supports or refutes the claim. Current verifiers are trained on small labelled sets "
        "and transfer poorly across domains. We introduce a contrastive pretraining objective that "
        "aligns claims with evidence sentences using hard negatives mined from citation contexts. "
        "Experiments on SciFact and HealthVer show consistent gains in label accuracy."
    )
    refs = make_pool(rng, topic, 12, 2016, 2023, "B")
    keys = [f"ref{i + 1}" for i in range(10)]
    negative = {"ref3", "ref7"}
    body = ["\\section{Introduction}"]
    body += paragraphs(rng, topic, keys[:4], 6, 6, negative)
    body.append("We introduce a contrastive pretraining objective for claim verification. We show that "
                "mining hard negatives from citation contexts improves transfer to new domains.")
    body.append("\\section{Approach}")
    body += paragraphs(rng, topic, keys[4:7], 6, 6, negative)
    body.append("The model uses a shared sentence encoder trained with a contrastive objective over "
                "claim and evidence pairs.")
    body.append("\\section{Evaluation}")
    body.append("We evaluate on SciFact and HealthVer and report label accuracy and F1. Results show "
                "a gain of 3.1 points in label accuracy over the strongest baseline.")
    body += paragraphs(rng, topic, keys[7:], 6, 6, negative)
    items = []
    for k, r in zip(keys, refs[:10]):
        names = ", ".join(a["name"] for a in r["authors"])
        items.append(f"\\bibitem{{{k}}} {names}.\n\\newblock {r['title']}.\n\\newblock In {r['venue']}, {r['year']}.")
    main = "\n".join([
        "\\documentclass{article}",
        "\\begin{document}",
        f"\\title{{{title}}}",
        "\\begin{abstract}", abstract, "\\end{abstract}",
        "\n\n".join(body),
        "\\begin{thebibliography}{10}",
        "\n\n".join(items),
        "\\end{thebibliography}",
        "\\end{document}",
        "",
    ])
    return {
        "arxiv_id": "2402.05678", "title": title, "abstract": abstract, "year": 2024,
        "venue": "arXiv", "authors": ["Pia Rossi", "Jun Ito"],
        "refs": refs, "source": gz_bytes(main), "topic": topic,
    }


def atom_feed(entries):
    def esc(s):
        return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    parts = ['<?xml version="1.0" encoding="UTF-8"?>',
             '<feed xmlns="http://www.w3.org/2005/Atom" xmlns:arxiv="http://arxiv.org/schemas/atom" '
             'xmlns:opensearch="http://a9.com/-/spec/opensearch/1.1/">',
             "  <title>arXiv Query Results</title>",
             f"  <opensearch:totalResults>{len(entries)}</opensearch:totalResults>"]
    for e in entries:
        parts.append("  <entry>")
        parts.append(f"    <id>http://arxiv.org/abs/{e['arxiv_id']}v{e.get('version', 1)}</id>")
        parts.append(f"    <published>{e['year']}-0{e.get('month', 1)}-15T00:00:00Z</published>")
        parts.append(f"    <title>{esc(e['title'])}</title>")
        parts.append(f"    <summary>  {esc(e['abstract'])}\n    </summary>")
        for a in e["authors"]:
            parts.append(f"    <author><name>{esc(a)}</name></author>")
        if e.get("journal_ref"):
            parts.append(f"    <arxiv:journal_ref>{esc(e['journal_ref'])}</arxiv:journal_ref>")
        parts.append(f'    <link href="http://arxiv.org/abs/{e["arxiv_id"]}v1" rel="alternate" type="text/html"/>')
        parts.append("  </entry>")
    parts.append("</feed>")
    return "\n".join(parts) + "\n"


def arxiv_search_url(query, limit):
    return ARXIV_QUERY + "?" + urlencode({"search_query": f'ti:"{query}"', "start": "0", "max_results": str(limit)})


def s2_paper_json(p, s2id):
    return {
        "paperId": s2id,
        "externalIds": {"ArXiv": p["arxiv_id"]},
        "title": p["title"], "abstract": p["abstract"],
        "authors": [{"name": a} for a in p["authors"]],
        "year": p["year"], "venue": p["venue"],
        "url": f"https://www.semanticscholar.org/paper/{s2id}", "citationCount": 3,
    }


def transport_fixtures():
    rng = random.Random(20240101)
    out = ROOT / "transport"
    routes = []

    def route(url, body_file=None, json_=None, status=200, body=None):
        r = {"method": "GET", "url": url, "status": status}
        if body_file:
            r["body_file"] = body_file
        if json_ is not None:
            r["json"] = json_
        if body is not None:
            r["body"] = body
        routes.append(r)

    papers = [paper_a(rng), paper_b(rng)]
    for p in papers:
        aid = p["arxiv_id"]
        s2id = s2_id("main" + aid)
        write(out / "bodies" / f"{aid}.src", p["source"])
        route(f"{ARXIV_SOURCE}/{aid}", body_file=f"bodies/{aid}.src")
        route(f"{S2}/graph/v1/paper/arXiv:{aid}?fields={FIELDS}", json_=s2_paper_json(p, s2id))
        route(f"{S2}/graph/v1/paper/{s2id}/references?fields={FIELDS}&limit=1000",
              json_={"offset": 0, "data": [{"citedPaper": r} for r in p["refs"]]})
        recs = make_pool(random.Random(aid), p["topic"], 30, 2018, 2025, "R" + aid)
        # one recommendation restates the main abstract, one has no abstract
        recs[5]["abstract"] = p["abstract"]
        recs[5]["year"] = p["year"] - 1
        recs[9]["abstract"] = None
        route(f"{S2}/recommendations/v1/papers/forpaper/{s2id}?limit=30&fields={FIELDS}",
              json_={"recommendedPapers": recs})
        # abstract-only mode searches by title
        search_hits = [s2_paper_json(p, s2id)] + recs[10:30] + make_pool(random.Random("S" + aid), p["topic"], 9, 2018, 2025, "S" + aid)
        url = S2 + "/graph/v1/paper/search?" + urlencode({"query": p["title"], "limit": "30", "fields": FIELDS})
        route(url, json_={"total": len(search_hits), "offset": 0, "data": search_hits})

    # arXiv title search
    a, b = papers
    write(out / "bodies" / "search_sparse_routing.xml", atom_feed([
        {"arxiv_id": a["arxiv_id"], "title": a["title"], "abstract": a["abstract"], "year": 2024, "authors": a["authors"]},
        {"arxiv_id": "2310.04411", "title": "Sparse Routing for Mixture-of-Experts Language Models",
         "abstract": "Mixture-of-experts models route tokens to experts. We study sparse routing.", "year": 2023,
         "authors": ["Sami Sato"], "journal_ref": "ICLR 2024"},
    ]))
    route(arxiv_search_url("sparse routing transformers", 10), body_file="bodies/search_sparse_routing.xml")
    write(out / "bodies" / "search_attention.xml", atom_feed([
        {"arxiv_id": "1706.03762", "version": 7, "title": "Attention Is All You Need",
         "abstract": "The dominant sequence transduction models are based on complex recurrent or convolutional neural networks.",
         "year": 2017, "month": 6, "authors": ["Ashish Vaswani", "Noam Shazeer"], "journal_ref": "NeurIPS 2017"},
        {"arxiv_id": "2107.08000", "title": "Attention Is All You Need in Speech Separation",
         "abstract": "Transformers for speech separation.", "year": 2021, "authors": ["Cem Subakan"]},
        {"arxiv_id": "2306.01000", "title": "Is Attention All You Need for Tabular Data?",
         "abstract": "A study of attention for tabular data.", "year": 2023, "authors": ["Rosa Costa"]},
        {"arxiv_id": "2003.05000", "title": "Attention Is Not All You Need: Pure Attention Loses Rank",
         "abstract": "Pure attention loses rank doubly exponentially with depth.", "year": 2020, "authors": ["Yihe Dong"]},
        {"arxiv_id": "hep-th/9901001", "title": "Attention Is All You Need for Lattice Models",
         "abstract": "An old-style identifier entry.", "year": 1999, "authors": ["Ivo Petrov"]},
    ]))
    route(arxiv_search_url("attention is all you need", 10), body_file="bodies/search_attention.xml")
    write(out / "bodies" / "search_empty.xml", atom_feed([]))
    route(arxiv_search_url("qwxzv plorkt", 10), body_file="bodies/search_empty.xml")

    # failure cases
    route(f"{S2}/graph/v1/paper/arXiv:2501.99999?fields={FIELDS}", status=404, json_={"error": "Paper not found"})
    route(f"{ARXIV_SOURCE}/2501.99999", status=404, body="not found")
    route(f"{S2}/graph/v1/paper/arXiv:2501.00007?fields={FIELDS}",
          json_=s2_paper_json({"arxiv_id": "2501.00007", "title": "A Paper Without References",
                               "abstract": "Nothing is cited here.", "authors": ["Tara Urban"], "year": 2025,
                               "venue": "arXiv"}, s2_id("noref")))
    route(f"{S2}/graph/v1/paper/{s2_id('noref')}/references?fields={FIELDS}&limit=1000", json_={"offset": 0, "data": []})
    # no LaTeX source: the pipeline degrades to abstract-only mode
    route(f"{ARXIV_SOURCE}/2501.00007", status=404, body="no source")
    route(f"{S2}/recommendations/v1/papers/forpaper/{s2_id('noref')}?limit=30&fields={FIELDS}",
          json_={"recommendedPapers": make_pool(random.Random("noref"), ROUTING, 6, 2018, 2024, "noref")})
    texparse_fixtures()
    write(out / "bodies" / "2403.00012.src", (ROOT / "texparse" / "planted.tar.gz").read_bytes())
    route(f"{ARXIV_SOURCE}/2403.00012", body_file="bodies/2403.00012.src")
    write(out / "manifest.json", {"routes": routes})
    return papers


# ---------------------------------------------------------------- retrieval pools

def retrieval_fixtures():
    rng = random.Random(7)
    pools = []
    for i, topic in enumerate([ROUTING, CLAIMS, ROUTING, CLAIMS]):
        recs = make_pool(rng, topic, 10, 2015, 2025, f"pool{i}")
        main_title = related_title(rng, topic, i)
        main = {"id": f"main{i}", "title": main_title, "abstract": related_abstract(rng, topic, main_title)}
        cited = [{"id": r["paperId"], "title": r["title"], "abstract": r["abstract"], "year": r["year"]} for r in recs]
        if i == 0:
            cited[6] = {"id": "dup-of-main", "title": main["title"], "abstract": main["abstract"], "year": 2020}
        if i == 3:
            # two identical records with different ids exercise the id tie-break
            cited[2] = dict(cited[7], id="aaaa-tie")
            cited[7] = dict(cited[7], id="zzzz-tie")
        pools.append({"name": f"pool{i}", "k": 3, "main": main, "cited": cited})
    batches = []
    for i, topic in enumerate([ROUTING, CLAIMS, ROUTING]):
        recs = make_pool(rng, topic, 8, 2019, 2025, f"batch{i}")
        main_title = related_title(rng, topic, i + 3)
        main_abstract = related_abstract(rng, topic, main_title)
        papers = [{"id": r["paperId"], "title": r["title"], "abstract": r["abstract"], "year": r["year"]} for r in recs]
        if i == 0:
            papers[3]["abstract"] = main_abstract
            papers[3]["year"] = 2021
        batches.append({"name": f"batch{i}", "k": 3, "cutoff_year": 2023, "main_abstract": main_abstract,
                        "papers": papers})
    write(ROOT / "retrieval" / "citation_pools.json", pools)
    write(ROOT / "retrieval" / "semantic_batches.json", batches)


# ---------------------------------------------------------------- ground truth

YEAR_COUNTS = [(2022, 534, 450), (2023, 688, 555), (2024, 929, 549), (2025, 912, 456)]
VENUE_BY_YEAR = {2022: "ICLR 2022", 2023: "ICLR 2023", 2024: "ICLR 2024", 2025: "ICLR 2025"}


def median(xs):
    return statistics.median(xs)


def score_list(rng, novel):
    while True:
        n = rng.choice([3, 4, 4, 5])
        if novel:
            xs = [rng.choice([3, 4, 4, 5, 5]) for _ in range(n)]
        else:
            xs = [rng.choice([1, 2, 3, 3, 4]) for _ in range(n)]
        if (median(xs) >= 4) == novel:
            return xs


def groundtruth_fixture():
    rng = random.Random(2025)
    lines = []
    for year, count, novel in YEAR_COUNTS:
        flags = [True] * novel + [False] * (count - novel)
        rng.shuffle(flags)
        for i, f in enumerate(flags):
            lines.append(json.dumps({"id": f"or-{year}-{i:04d}", "scores": score_list(rng, f),
                                     "venue": VENUE_BY_YEAR[year], "year": year}))
    # sanity: even-length lists with a 3.5 median must exist
    assert any(len(json.loads(l)["scores"]) % 2 == 0 and median(json.loads(l)["scores"]) == 3.5 for l in lines)
    write(ROOT / "groundtruth" / "originality.jsonl", "\n".join(lines) + "\n")


# ---------------------------------------------------------------- tournament

def tournament_fixture():
    rationales = {
        "human": "The paper is novel because the routing layer is learned rather than fixed, which no "
                 "prior sparse graph transformer does.",
        "basic": "The paper proposes a method. It seems somewhat new. Some related work exists.",
        "structured": "The central claim, that learned top-k routing keeps accuracy while cutting memory, is "
                      "supported by the routing-layer method and the ogbn-arxiv experiments. Supporting "
                      "work on sparse attention motivates the design, while contrasting work on fixed "
                      "patterns shows the gap this paper fills. The contribution is a clear extension "
                      "with a new mechanism.",
    }
    write(ROOT / "tournament" / "rationales.json",
          {"paper": "Sparse Routing Transformers for Citation Graphs", "rationales": rationales,
           "preference": ["structured", "human", "basic"]})


# ---------------------------------------------------------------- texparse

PLANTED_MAIN = r"""\documentclass{article}
\usepackage{natbib,biblatex}
% \cite{xi2014} in the preamble never counts
\begin{document}
\title{Planted Citations}
\begin{abstract}
A small corpus with known citation sites.
\end{abstract}

\section{Introduction}
Sparse attention was explored by \citet{alpha2020} in the ZETA1 setting.
Graph pooling \citep[see][p.~4]{beta2021} underlies ZETA2 designs.
Several systems combine both ideas \cite{gamma2019, delta2018} in ZETA3 pipelines.
% Older work \citep{xi2014} is out of scope.
Routing helps in practice, as \parencite{epsilon2022} observe for ZETA5 graphs. % \cite{omicron2013}
\textcite{zeta2017} reported ZETA6 results.

\input{sections/a}
\include{sections/b}

\begin{comment}
This block mentions \cite{pi2012} and is never typeset.
\end{comment}
\iffalse
Neither is \citep{rho2011}.
\fi
\bibliography{refs}
\end{document}
"""

PLANTED_A = r"""\section{Background}
\citet*{eta2020} studied ZETA7 benchmarks.
Results in Sec.~3 of \cite{theta2016} confirm the ZETA8 effect.
%\cite{iota2015} was dropped after review.
\autocite{kappa2021} extends ZETA9 to directed graphs.
"""

PLANTED_B = r"""\section{Method}
\begin{itemize}
  \item \Citet{lambda2019} introduced ZETA10 scoring.
  \item Our ZETA11 baseline follows \citealp{mu2018}.
\end{itemize}
See \citep{nu2020} for ZETA12 details, e.g. the proofs.
"""

PLANTED = [("alpha2020", "ZETA1"), ("beta2021", "ZETA2"), ("gamma2019", "ZETA3"), ("delta2018", "ZETA3"),
           ("epsilon2022", "ZETA5"), ("zeta2017", "ZETA6"), ("eta2020", "ZETA7"), ("theta2016", "ZETA8"),
           ("kappa2021", "ZETA9"), ("lambda2019", "ZETA10"), ("mu2018", "ZETA11"), ("nu2020", "ZETA12")]
COMMENTED = ["xi2014", "omicron2013", "pi2012", "rho2011", "iota2015"]

SENTENCES = [
    ["We use et al. citations.", "Then we stop."],
    ["Accuracy is 0.73.", "Done."],
    ["As shown in Fig. 3, the loss decreases.", "Eq. 2 gives the update rule.", "We discuss limitations in Sec. 5."],
    ["Smith et al. propose a related model.", "Their results, e.g. on Cora, are strong.",
     "Our method differs, i.e. it learns routing."],
    ["Does routing help?", "Yes!", "The gain is 2.5 points on average."],
    ["The dataset has approx. 1.2 million nodes.", "Training takes 3.5 hours on one GPU.",
     "We use a learning rate of 1e-4."],
    ["Prior work (cf. Table 2) uses dense attention.", "We compare against it.",
     "The difference is significant (p < 0.01)."],
    ["\"Sparse is enough,\" the authors claim.", "We test this claim."],
    ["The model was trained by Dr. Weber in Jan. 2024.", "It converged quickly."],
    ["Results improve with depth (see Fig. 4).", "Shallow models underfit."],
    ["The U.S. census data is not used.", "We rely on public benchmarks."],
    ["We evaluate ⟨cite:x⟩ and ⟨cite:y⟩ on three tasks.", "Results vary widely across tasks."],
    ["Version 2.0 of the toolkit is used.", "It supports vs. comparisons natively.", "See App. B for details."],
    ["The first stage filters candidates.", "The second stage ranks them.", "The third stage summarises each pair.",
     "A final stage writes the report."],
    ["Is the graph acyclic?", "We check this with a depth-first search.", "Violations are reported to the model."],
    ["Scores range from 1 to 5.", "Higher is better.", "Ties are resolved toward the lower label."],
    ["We thank J. R. Smith for comments.", "All errors are ours."],
    ["Memory drops from 4.0 GB to 1.0 GB.", "Throughput rises by 30%."],
    ["Our code is released under an open licence.", "It runs on CPUs and GPUs.", "Pretrained weights are included.",
     "Documentation covers every option."],
]


def texparse_fixtures():
    out = ROOT / "texparse"
    files = {"main.tex": PLANTED_MAIN, "sections/a.tex": PLANTED_A, "sections/b.tex": PLANTED_B}
    keys = [k for k, _ in PLANTED] + COMMENTED
    files["refs.bib"] = "\n".join(
        f"@article{{{k},\n  title = {{Planted Reference {k.rstrip('0123456789').title()}}},\n"
        f"  author = {{Ana Abe}},\n  year = {{{k[-4:]}}}\n}}\n" for k in keys)
    for name, text in files.items():
        write(out / "planted" / name, text)
    write(out / "planted.tar.gz", tar_bytes(files))
    write(out / "planted_expected.json", {
        "planted": [{"key": k, "marker": m} for k, m in PLANTED],
        "commented": COMMENTED,
    })
    assert sum(len(p) for p in SENTENCES) == 50
    write(out / "sentences.json", SENTENCES)


if __name__ == "__main__":
    transport_fixtures()
    retrieval_fixtures()
    groundtruth_fixture()
    tournament_fixture()
    print("fixtures written to", ROOT)
