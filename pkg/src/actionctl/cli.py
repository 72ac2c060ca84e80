"""Command-line front door: validate, serve, invoke, flow, intents.

Exit codes are uniform across commands: 0 success, 1 validation
findings, 2 usage error, 3 runtime or transport failure.
"""

from __future__ import annotations

import json
import os
import socket
import sys
from pathlib import Path

import click
import httpx

from . import agent as flow_engine
from .actions import extract_intent, parse_action
from .gateway import (
    DEFAULT_MAPPING,
    GatewayConfig,
    GatewayConfigError,
    LD_JSON,
    PACKAGED_FIXTURES,
    create_app,
)
from .graph import ToolkitError, parse_graph, serialize_graph
from .vocab import load_vocabulary_files, validate_graph

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3

VOCAB_ENV = "ACTIONS_VOCAB_PATH"
PAGE_SIZE = 3

vocab_option = click.option(
    "--vocab", "vocab_flags", multiple=True,
    type=click.Path(exists=True, path_type=Path),
    help="Vocabulary file or directory; repeatable.")


def _vocab_files(flags: tuple[Path, ...]) -> list[Path]:
    if flags:
        chosen = list(flags)
    elif os.environ.get(VOCAB_ENV):
        chosen = [Path(p) for p in os.environ[VOCAB_ENV].split(os.pathsep) if p]
    else:
        chosen = [PACKAGED_FIXTURES / "vocab"]
    files: list[Path] = []
    for p in chosen:
        files.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    return files


def _load_vocab(flags: tuple[Path, ...]):
    try:
        return load_vocabulary_files(_vocab_files(flags))
    except (OSError, ToolkitError) as exc:
        raise click.UsageError(f"cannot load vocabulary: {exc}")


def _http_transport(url: str, body_text: str) -> tuple[int, dict]:
    resp = httpx.post(url, content=body_text,
                      headers={"Content-Type": LD_JSON}, timeout=10.0)
    try:
        payload = resp.json()
    except ValueError:
        payload = {}
    return resp.status_code, payload if isinstance(payload, dict) else {}


def _discover(entry: str, vocab):
    try:
        descriptors, diagnostics = flow_engine.discover_actions(entry, vocab)
    except flow_engine.UnreachableError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_RUNTIME)
    for line in diagnostics:
        click.echo(line, err=True)
    if not descriptors:
        sys.exit(EXIT_FINDINGS)
    return descriptors


def _pick_action(descriptors, wanted: str | None):
    if wanted is None:
        return descriptors[0]
    for d in descriptors:
        if wanted in (extract_intent(d).name, d.id) or \
                (d.id or "").endswith("/" + wanted):
            return d
    raise click.UsageError(f"no action {wanted!r} at this entry")


@click.group()
def main() -> None:
    """Operate schema.org-annotated Web APIs from the terminal."""


@main.command()
@click.argument("annotation", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@vocab_option
@click.option("--json", "as_json", is_flag=True, help="Machine-readable report.")
def validate(annotation: Path, vocab_flags, as_json: bool) -> None:
    """Check an annotation file against the vocabulary."""
    vocab = _load_vocab(vocab_flags)
    try:
        g = parse_graph(annotation.read_text())
    except (OSError, ToolkitError) as exc:
        click.echo(f"cannot read annotation: {exc}", err=True)
        sys.exit(EXIT_FINDINGS)
    report = validate_graph(g, vocab)
    if as_json:
        click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        click.echo(str(report))
    sys.exit(EXIT_OK if report.ok else EXIT_FINDINGS)


@main.command()
@click.option("--mapping", type=click.Path(path_type=Path), default=DEFAULT_MAPPING,
              show_default="packaged hotel demo", help="Mapping document to serve.")
@vocab_option
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--backend", default=None, help="Override the mapping's backend base URL.")
@click.option("--console", "console_dir", type=click.Path(path_type=Path), default=None,
              help="Static console bundle to mount under /console.")
@click.option("--public-base", default=None, help="Externally visible base URL.")
def serve(mapping: Path, vocab_flags, port: int, backend: str | None,
          console_dir: Path | None, public_base: str | None) -> None:
    """Run the gateway until interrupted."""
    try:
        config = GatewayConfig(
            mapping_path=mapping, vocab_paths=tuple(_vocab_files(vocab_flags)),
            port=port, backend_override=backend, console_dir=console_dir,
            public_base_url=public_base)
    except GatewayConfigError as exc:
        raise click.UsageError(str(exc))
    try:
        app = create_app(config)
    except (OSError, ToolkitError) as exc:
        click.echo(f"cannot start gateway: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    try:
        # claim the port up front so a bind failure is a clean exit, not a log line
        probe = socket.socket()
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind(("0.0.0.0", port))
        probe.close()
    except OSError as exc:
        click.echo(f"cannot bind port {port}: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(f"serving actions at {config.public_base}/actions")
    sys.stdout.flush()

    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=port, log_level="warning")


@main.command()
@click.option("--entry", required=True, help="Gateway base URL or its /actions URL.")
@click.option("--action", "action_name", default=None,
              help="Intent name, action id, or resource id; default first discovered.")
@click.option("--input", "inputs", multiple=True, metavar="PATH=VALUE",
              help="Slot assignment; repeatable.")
@vocab_option
def invoke(entry: str, action_name: str | None, inputs, vocab_flags) -> None:
    """Single-shot call: fill inputs, invoke once, print the envelope."""
    vocab = _load_vocab(vocab_flags)
    descriptor = _pick_action(_discover(entry, vocab), action_name)
    s = flow_engine.start_session(descriptor, vocab)
    for raw in inputs:
        path, sep, value = raw.partition("=")
        if not sep:
            raise click.UsageError(f"--input needs PATH=VALUE, got {raw!r}")
        try:
            flow_engine.fill_slot(s, path, value)
        except flow_engine.CoercionError as exc:
            raise click.UsageError(f"--input {path}: {exc}")
        except flow_engine.AgentError as exc:
            click.echo(str(exc), err=True)
            sys.exit(EXIT_FINDINGS)
    if s.pending:
        for path in s.pending:
            click.echo(f"MISSING_REQUIRED {path}", err=True)
        sys.exit(EXIT_FINDINGS)
    try:
        status, payload = _http_transport(
            descriptor.entry_point.url_template, serialize_graph(s.filled))
    except httpx.HTTPError as exc:
        click.echo(f"transport failure: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    if status == 422 or payload.get("violations"):
        sys.exit(EXIT_FINDINGS)
    sys.exit(EXIT_OK if 200 <= status < 300 else EXIT_RUNTIME)


def _run_script(s: flow_engine.FlowSession, script_path: Path) -> None:
    try:
        steps = json.loads(script_path.read_text())
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"script is not JSON: {exc}")
    if not isinstance(steps, list):
        raise click.UsageError("script must be a JSON array of steps")
    for i, step in enumerate(steps):
        op = step.get("op") if isinstance(step, dict) else None
        try:
            if op == "fill":
                flow_engine.fill_slot(s, str(step["path"]), str(step["value"]))
            elif op == "invoke":
                flow_engine.invoke_current(s, _http_transport)
            elif op == "choose":
                flow_engine.choose(s, int(step["index"]))
            else:
                raise click.UsageError(f"step {i}: unknown op {op!r}")
        except KeyError as exc:
            raise click.UsageError(f"step {i}: missing field {exc}")
        except flow_engine.AgentError as exc:
            click.echo(f"step {i} ({op}): {exc}", err=True)
            sys.exit(EXIT_RUNTIME)


def _prompt_choice(s: flow_engine.FlowSession) -> None:
    shown = 0
    while True:
        for i, c in enumerate(s.choices[shown:shown + PAGE_SIZE], start=shown):
            price = f"  {c.price} {c.currency or ''}".rstrip() if c.price else ""
            click.echo(f"{i}. {c.label or extract_intent(c.descriptor).name}{price}")
        shown = min(shown + PAGE_SIZE, len(s.choices))
        hint = "choice index" + (" or m for more" if shown < len(s.choices) else "")
        raw = click.prompt(hint, type=str).strip()
        if raw.lower() == "m" and shown < len(s.choices):
            continue
        try:
            flow_engine.choose(s, int(raw))
            return
        except (ValueError, flow_engine.AgentError) as exc:
            click.echo(str(exc))
            shown = 0


def _run_interactive(s: flow_engine.FlowSession) -> None:
    while True:
        if s.state == flow_engine.ELICITING:
            prompt = flow_engine.prompts(s)[0]
            raw = click.prompt(f"{prompt.label} ({prompt.datatype})", type=str)
            try:
                flow_engine.fill_slot(s, prompt.path, raw)
            except flow_engine.AgentError as exc:
                click.echo(str(exc))
        elif s.state == flow_engine.READY_TO_INVOKE:
            click.echo(f"invoking {extract_intent(s.current).name} ...")
            flow_engine.invoke_current(s, _http_transport)
        elif s.state == flow_engine.PRESENTING:
            click.echo(s.message or f"found {len(s.choices)} items")
            _prompt_choice(s)
        else:
            return


@main.command("flow")
@click.option("--entry", required=True, help="Gateway base URL or its /actions URL.")
@click.option("--script", "script_path", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="JSON array of fill/invoke/choose steps.")
@click.option("--interactive", is_flag=True, help="Prompt on the terminal instead.")
@vocab_option
def flow_command(entry: str, script_path: Path | None, interactive: bool,
                 vocab_flags) -> None:
    """Walk a multi-step flow from the first discovered action."""
    if (script_path is None) == (not interactive):
        raise click.UsageError("pass exactly one of --script or --interactive")
    vocab = _load_vocab(vocab_flags)
    descriptors = _discover(entry, vocab)
    s = flow_engine.start_session(descriptors[0], vocab)
    if script_path is not None:
        _run_script(s, script_path)
    else:
        _run_interactive(s)
    for record in s.transcript:
        click.echo(json.dumps(record, sort_keys=True))
    click.echo(f"state: {s.state}")
    if s.message:
        click.echo(s.message)
    for key, value in flow_engine.outputs_summary(s).items():
        click.echo(f"{key}: {value}")
    sys.exit(EXIT_OK if s.state == flow_engine.COMPLETED else EXIT_RUNTIME)


@main.command()
@click.argument("annotation", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@vocab_option
def intents(annotation: Path, vocab_flags) -> None:
    """List the intents an annotation file offers, one per line."""
    vocab = _load_vocab(vocab_flags)
    try:
        items = json.loads(annotation.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"cannot read annotations: {exc}", err=True)
        sys.exit(EXIT_FINDINGS)
    if isinstance(items, dict):
        items = [items]
    if not isinstance(items, list) or not items:
        click.echo("no actions found", err=True)
        sys.exit(EXIT_FINDINGS)
    diagnostics, lines = [], []
    for i, item in enumerate(items):
        try:
            g = parse_graph(json.dumps(item))
            d = parse_action(g, g.roots[0], vocab)
        except (ToolkitError, IndexError) as exc:
            diagnostics.append(f"element {i}: {exc}")
            continue
        intent = extract_intent(d)
        paths = " ".join(slot.path for slot in intent.required_slots)
        lines.append(f"{intent.name}  {paths}".rstrip())
    for line in lines:
        click.echo(line)
    for line in diagnostics:
        click.echo(line, err=True)
    sys.exit(EXIT_FINDINGS if diagnostics or not lines else EXIT_OK)


if __name__ == "__main__":
    main()
