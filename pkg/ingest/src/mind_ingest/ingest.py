"""Converters from raw MIND-style tables to the core interchange formats.

Inputs are tab-separated:

  behaviors.tsv  impression_id, user_id, [time,] history, impressions
                 where `impressions` holds space-separated "itemid-label"
                 tokens with label 0 or 1
  news.tsv       item_id, category, subcategory, title[, ...]

and a word-vector text file ("token v1 v2 ... vD" per line). Outputs match
the consumer's JSON-lines schemas: logged interactions, an item embedding
table (title-token mean vectors, truncated or zero-padded to dim-1 so the
consumer can append its bias slot), and a topic catalog grouping items by
category. Malformed rows are skipped and counted, never fatal.
"""

from __future__ import annotations


def parse_behaviors(path):
    """Expand behavior rows into one interaction record per impression token.

    Returns (records, skipped): records are dicts with impression/user/item/
    label keys; rows with a wrong column count, an empty impression list or
    a malformed token are skipped and counted.
    """
    records = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) == 5:
                imp_id, user, _time, _history, impressions = cols
            elif len(cols) == 4:
                imp_id, user, _history, impressions = cols
            else:
                skipped += 1
                continue
            tokens = impressions.split()
            if not tokens or not imp_id or not user:
                skipped += 1
                continue
            row = []
            for token in tokens:
                item, sep, label = token.rpartition("-")
                if not sep or not item or label not in ("0", "1"):
                    row = None
                    break
                row.append({"impression": imp_id, "user": user, "item": item, "label": int(label)})
            if row is None:
                skipped += 1
            else:
                records.extend(row)
    return records, skipped


def parse_news(path):
    """Read (item_id, category, subcategory, title) rows; returns
    (rows, skipped). Duplicate ids and rows missing an id or category are
    skipped."""
    rows = []
    seen = set()
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) < 4:
                skipped += 1
                continue
            item, category, subcategory, title = cols[0], cols[1], cols[2], cols[3]
            if not item or not category or item in seen:
                skipped += 1
                continue
            seen.add(item)
            rows.append((item, category, subcategory, title))
    return rows, skipped


def read_word_vectors(path):
    """Load a text word-vector file; all vectors must share one length."""
    vectors = {}
    width = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split()
            if len(parts) < 2:
                continue
            token, values = parts[0], parts[1:]
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ValueError(f"{path}: vector for {token!r} has {len(values)} dims, expected {width}")
            vectors[token] = [float(v) for v in values]
    if not vectors:
        raise ValueError(f"{path}: no word vectors found")
    return vectors


def _title_vector(title, vectors, out_dim):
    tokens = title.lower().split()
    known = [vectors[t] for t in tokens if t in vectors]
    if not known:
        return [0.0] * out_dim, True
    width = len(known[0])
    mean = [sum(v[k] for v in known) / len(known) for k in range(width)]
    if width >= out_dim:
        return mean[:out_dim], False
    return mean + [0.0] * (out_dim - width), False


def build_embeddings(news_rows, vectors, dim):
    """Mean title-token vectors per item, sized to dim-1 (the consumer
    appends the bias slot). Returns (table, n_all_unknown)."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    table = {}
    all_unknown = 0
    for item, _category, _sub, title in news_rows:
        vec, unknown = _title_vector(title, vectors, dim - 1)
        table[item] = vec
        all_unknown += unknown
    return table, all_unknown


def build_topic_catalog(news_rows):
    """Group item ids by category. Returns (catalog, size_histogram)."""
    catalog = {}
    for item, category, _sub, _title in news_rows:
        catalog.setdefault(category, []).append(item)
    catalog = {t: sorted(items) for t, items in sorted(catalog.items())}
    histogram = {}
    for items in catalog.values():
        histogram[len(items)] = histogram.get(len(items), 0) + 1
    return catalog, histogram
