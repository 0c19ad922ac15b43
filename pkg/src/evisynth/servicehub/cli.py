"""Command line front door.

Network commands talk to a running server and print the raw response body,
so shell output is byte-identical to the HTTP payload. Local commands
(train-screener, gen-screener-data, eval) work on files without a server.
"""

from __future__ import annotations

import errno
import json
import sys
from typing import Optional

import click
import httpx

from ..errors import BadConfig, PortInUse
from ..evalkit import derive_metrics
from .api import canonical_json, create_app
from .config import Config, default_config, load_config
from .engine import Engine

DEFAULT_BASE_URL = "http://127.0.0.1:8611"


def _call(ctx: click.Context, method: str, path: str, **kwargs) -> None:
    base = ctx.obj["base_url"]
    try:
        resp = httpx.request(method, base + path, timeout=60.0, **kwargs)
    except httpx.HTTPError as exc:
        click.echo(f"request failed: {exc}", err=True)
        raise SystemExit(1)
    body = resp.content.decode("utf-8")
    if resp.status_code >= 400:
        click.echo(body, err=True)
        raise SystemExit(1)
    click.echo(body)


def _read_payload(file: Optional[str]) -> str:
    if file is None or file == "-":
        return sys.stdin.read()
    with open(file, "r", encoding="utf-8") as fh:
        return fh.read()


@click.group()
@click.option("--base-url", default=DEFAULT_BASE_URL, show_default=True, help="Server address.")
@click.pass_context
def main(ctx: click.Context, base_url: str) -> None:
    """Evidence synthesis engine for living systematic reviews."""
    ctx.ensure_object(dict)
    ctx.obj["base_url"] = base_url.rstrip("/")


@main.command()
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.option("--host", default=None, help="Bind address (overrides config).")
@click.option("--port", default=None, type=int, help="Bind port (overrides config).")
def serve(config_path: Optional[str], host: Optional[str], port: Optional[int]) -> None:
    """Run the HTTP service, restoring any snapshot in the storage dir."""
    import uvicorn

    try:
        config = load_config(config_path) if config_path else default_config()
    except BadConfig as exc:
        click.echo(f"bad config: {exc}", err=True)
        raise SystemExit(1)
    if host is not None:
        config.service.host = host
    if port is not None:
        config.service.port = port
    engine = Engine.load(config)
    app = create_app(engine)
    try:
        uvicorn.run(app, host=config.service.host, port=config.service.port, log_level="warning")
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise PortInUse(f"port {config.service.port} is already bound")
        raise


@main.command()
@click.option("--file", "file", default=None, help="Records file; '-' or omit for stdin.")
@click.option("--format", "format_", default="jsonl", show_default=True)
@click.pass_context
def ingest(ctx: click.Context, file: Optional[str], format_: str) -> None:
    """Add records to the corpus."""
    payload = _read_payload(file)
    _call(ctx, "POST", "/ingest", content=canonical_json({"payload": payload, "format": format_}))


@main.command()
@click.option("--file", "file", default=None, help="Records file; '-' or omit for stdin.")
@click.option("--format", "format_", default="jsonl", show_default=True)
@click.pass_context
def update(ctx: click.Context, file: Optional[str], format_: str) -> None:
    """Run a living update with new records."""
    payload = _read_payload(file)
    _call(ctx, "POST", "/update", content=canonical_json({"payload": payload, "format": format_}))


@main.command()
@click.option("--seed", default=None, type=int)
@click.option("--n-topics", default=None, type=int)
@click.pass_context
def fit(ctx: click.Context, seed: Optional[int], n_topics: Optional[int]) -> None:
    """Fit the topic model over the current corpus."""
    body: dict = {}
    if seed is not None:
        body["seed"] = seed
    if n_topics is not None:
        body["n_topics"] = n_topics
    _call(ctx, "POST", "/fit", content=canonical_json(body))


@main.command()
@click.option("--limit", default=50, show_default=True)
@click.option("--offset", default=0, show_default=True)
@click.pass_context
def records(ctx: click.Context, limit: int, offset: int) -> None:
    """List stored records."""
    _call(ctx, "GET", f"/records?limit={limit}&offset={offset}")


@main.command()
@click.argument("record_id")
@click.pass_context
def screening(ctx: click.Context, record_id: str) -> None:
    """Show the screening assessment for one record."""
    _call(ctx, "GET", f"/screening/{record_id}")


@main.command()
@click.argument("record_id")
@click.option("--action", type=click.Choice(["accepted", "overridden"]), required=True)
@click.option("--reviewer", default="reviewer", show_default=True)
@click.option("--design", default=None, help="Replacement design leaf when overriding.")
@click.option("--setting", default=None, help="Replacement setting when overriding.")
@click.pass_context
def decision(
    ctx: click.Context,
    record_id: str,
    action: str,
    reviewer: str,
    design: Optional[str],
    setting: Optional[str],
) -> None:
    """Record a reviewer decision on a screening assessment."""
    body: dict = {"action": action, "reviewer": reviewer}
    override = {}
    if design:
        override["design"] = design
    if setting:
        override["setting"] = setting
    if override:
        body["override"] = override
    _call(ctx, "POST", f"/screening/{record_id}/decision", content=canonical_json(body))


@main.command()
@click.pass_context
def topics(ctx: click.Context) -> None:
    """List fitted topics with labels and sizes."""
    _call(ctx, "GET", "/topics")


@main.command()
@click.option("--start", default=None, type=int)
@click.option("--end", default=None, type=int)
@click.pass_context
def trends(ctx: click.Context, start: Optional[int], end: Optional[int]) -> None:
    """Topic-by-year counts, shares and redundancy alerts."""
    params = []
    if start is not None:
        params.append(f"start={start}")
    if end is not None:
        params.append(f"end={end}")
    suffix = ("?" + "&".join(params)) if params else ""
    _call(ctx, "GET", "/topics/trends" + suffix)


@main.command()
@click.argument("topic_id", type=int)
@click.option("-n", "n", default=10, show_default=True)
@click.pass_context
def terms(ctx: click.Context, topic_id: int, n: int) -> None:
    """Top weighted terms for one topic."""
    _call(ctx, "GET", f"/topics/{topic_id}/terms?n={n}")


@main.command()
@click.argument("question")
@click.option("--k", default=None, type=int, help="Initial retrieval depth.")
@click.pass_context
def query(ctx: click.Context, question: str, k: Optional[int]) -> None:
    """Ask a grounded question over the corpus."""
    body: dict = {"question": question}
    if k is not None:
        body["k"] = k
    _call(ctx, "POST", "/query", content=canonical_json(body))


@main.command("graph-query")
@click.argument("body")
@click.pass_context
def graph_query(ctx: click.Context, body: str) -> None:
    """Run a graph operation; BODY is the JSON request object."""
    try:
        parsed = json.loads(body)
    except json.JSONDecodeError as exc:
        click.echo(f"body is not valid JSON: {exc}", err=True)
        raise SystemExit(1)
    _call(ctx, "POST", "/graph/query", content=canonical_json(parsed))


@main.command()
@click.pass_context
def metrics(ctx: click.Context) -> None:
    """Corpus and pipeline counters."""
    _call(ctx, "GET", "/metrics")


@main.command()
@click.option("--limit", default=None, type=int)
@click.option("--kind", default=None)
@click.pass_context
def audit(ctx: click.Context, limit: Optional[int], kind: Optional[str]) -> None:
    """Read back the append-only audit log."""
    params = []
    if limit is not None:
        params.append(f"limit={limit}")
    if kind is not None:
        params.append(f"kind={kind}")
    suffix = ("?" + "&".join(params)) if params else ""
    _call(ctx, "GET", "/audit" + suffix)


@main.command()
@click.pass_context
def health(ctx: click.Context) -> None:
    """Service liveness and module status."""
    _call(ctx, "GET", "/health")


@main.command("train-screener")
@click.option("--dataset", required=True, help="JSONL file of {sentence, label} rows.")
@click.option("--out", required=True, help="Where to write the trained model.")
@click.option("--epochs", default=10, show_default=True)
@click.option("--learning-rate", default=0.5, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--holdout", default=0.2, show_default=True, help="Eval split fraction.")
def train_screener(
    dataset: str,
    out: str,
    epochs: int,
    learning_rate: float,
    batch_size: int,
    seed: int,
    holdout: float,
) -> None:
    """Train the sentence screener on a labelled dataset."""
    from ..screener import ModelConfig, TrainParams, evaluate_accuracy, load_dataset, split_dataset, train

    rows = load_dataset(dataset)
    train_rows, eval_rows = split_dataset(rows, held_out_fraction=holdout, seed=seed)
    params = TrainParams(
        learning_rate=learning_rate, epochs=epochs, batch_size=batch_size, seed=seed
    )
    result = train(train_rows, params, ModelConfig())
    result.model.save(out)
    accuracy = evaluate_accuracy(result.model, eval_rows) if eval_rows else None
    click.echo(
        canonical_json(
            {
                "trained_on": len(train_rows),
                "held_out": len(eval_rows),
                "accuracy": accuracy,
                "final_loss": result.loss_curve[-1],
                "model": out,
            }
        ).decode("utf-8")
    )


@main.command("gen-screener-data")
@click.option("--out", required=True)
@click.option("--n", default=600, show_default=True)
@click.option("--seed", default=13, show_default=True)
def gen_screener_data(out: str, n: int, seed: int) -> None:
    """Write a synthetic labelled sentence dataset."""
    from ..screener import dump_dataset, generate_sentences

    rows = generate_sentences(n_sentences=n, seed=seed)
    dump_dataset(rows, out)
    click.echo(canonical_json({"written": len(rows), "path": out}).decode("utf-8"))


@main.command("eval")
@click.argument("fixture")
def eval_fixture(fixture: str) -> None:
    """Print a metrics report from a confusion fixture.

    FIXTURE is either a JSON object with tp/fp/tn/fn counts or a JSONL
    file of {"predicted": bool, "gold": bool} rows to be counted.
    """
    from ..evalkit import ConfusionCounts, confusion_from_pairs

    with open(fixture, "r", encoding="utf-8") as fh:
        text = fh.read().strip()
    if not text:
        click.echo("fixture is empty", err=True)
        raise SystemExit(1)
    first = json.loads(text.splitlines()[0])
    if {"tp", "fp", "tn", "fn"} <= set(first):
        counts = ConfusionCounts(
            tp=int(first["tp"]), fp=int(first["fp"]), tn=int(first["tn"]), fn=int(first["fn"])
        )
    else:
        pairs = [
            (bool(row["predicted"]), bool(row["gold"]))
            for row in (json.loads(line) for line in text.splitlines() if line.strip())
        ]
        counts = confusion_from_pairs(pairs)
    click.echo(derive_metrics(counts).to_json())


if __name__ == "__main__":
    main()
