"""Line protocol that lets an external agent drive a simulator session.

To the agent, one message per line, tagged::

    TASK|<config echo or rendered recipes>
    OBS|<feedback and observation after an accepted command>
    ERR|<feedback after a rejected command>
    HINT|<executable actions, when hints are on>
    END|outcome=...;clock=...;<metrics>

From the agent: raw command lines, ``Step(...)`` or ``Finish``.  Newlines
and backslashes inside payloads are escaped as ``\\n`` and ``\\\\``.
"""
from __future__ import annotations

import io
import socket
import sys
import socketserver
import subprocess
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, TextIO

from .dsl import RenderMode, parse_plan_text, render_instance
from .metrics import MetricsReport, evaluate
from .model import Instance, fmt_hms
from .schedulers import NoFeasiblePlan, check_plan, heuristic_schedule
from .sim import (
    FailureReason,
    SessionConfig,
    Transcript,
    apply_text,
    failure,
    initial_observation,
    new_session,
)

TAGS = ("TASK", "OBS", "ERR", "HINT", "END")


def escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\r", "").replace("\n", "\\n")


def unescape(text: str) -> str:
    out = []
    it = iter(text)
    for ch in it:
        if ch != "\\":
            out.append(ch)
            continue
        nxt = next(it, "")
        out.append("\n" if nxt == "n" else nxt)
    return "".join(out)


def encode(tag: str, payload: str) -> str:
    if tag not in TAGS:
        raise ValueError(f"unknown tag {tag!r}")
    return f"{tag}|{escape(payload)}"


def decode(line: str) -> tuple[str, str]:
    tag, sep, payload = line.rstrip("\n").partition("|")
    if not sep or tag not in TAGS:
        raise ValueError(f"not a protocol line: {line!r}")
    return tag, unescape(payload)


class TransportClosed(Exception):
    pass


class StreamTransport:
    """Line transport over a pair of text streams (stdio, a socket file, a pipe)."""

    def __init__(self, reader: TextIO, writer: TextIO, on_close=None):
        self.reader = reader
        self.writer = writer
        self.on_close = on_close

    def send(self, line: str) -> None:
        try:
            self.writer.write(line + "\n")
            self.writer.flush()
        except (OSError, ValueError) as e:
            raise TransportClosed(str(e)) from e

    def recv(self) -> str:
        try:
            line = self.reader.readline()
        except (OSError, ValueError) as e:
            raise TransportClosed(str(e)) from e
        if not line:
            raise TransportClosed("end of input")
        return line.rstrip("\r\n")

    def close(self) -> None:
        for f in (self.writer, self.reader):
            try:
                f.close()
            except OSError:
                pass
        if self.on_close is not None:
            self.on_close()


Agent = Callable[[list[str]], "str | None"]


class AgentTransport:
    """In-process transport: the agent sees the lines sent since its last turn.

    An agent returning ``None`` hangs up.
    """

    def __init__(self, agent: Agent):
        self.agent = agent
        self.pending: list[str] = []

    def send(self, line: str) -> None:
        self.pending.append(line)

    def recv(self) -> str:
        batch, self.pending = self.pending, []
        line = self.agent(batch)
        if line is None:
            raise TransportClosed("agent hung up")
        return line


@dataclass(frozen=True)
class BridgeConfig:
    mode: RenderMode = RenderMode.MASKED
    hints: bool = False
    max_revisions: int = 10
    repeat_limit: int = 3

    def session(self) -> SessionConfig:
        return SessionConfig(hints=self.hints, max_revisions=self.max_revisions,
                             repeat_limit=self.repeat_limit)

    def echo(self) -> str:
        return (f"tmsched session mode={self.mode.value} hints={'on' if self.hints else 'off'} "
                f"max_revisions={self.max_revisions} repeat_limit={self.repeat_limit}")


@dataclass(frozen=True)
class SessionResult:
    transcript: Transcript
    report: MetricsReport | None

    @property
    def outcome(self):
        return self.transcript.outcome


def reference_transcript(instance: Instance) -> Transcript | None:
    try:
        plan = heuristic_schedule(instance)
    except NoFeasiblePlan:
        return None
    return check_plan(instance, plan).transcript


def end_payload(transcript: Transcript, report: MetricsReport | None) -> str:
    parts = [f"outcome={transcript.outcome}", f"clock={fmt_hms(transcript.clock)}"]
    if report is not None:
        d = report.to_dict()
        parts += [f"{k}={d[k]}" for k in ("success", "progress_rate", "efficiency",
                                           "relative_efficiency", "multitask_score")]
    return ";".join(parts)


def serve_session(instance: Instance, transport, config: BridgeConfig | None = None,
                  reference: Transcript | None = None) -> SessionResult:
    """Run one session to its end over ``transport`` and return the transcript."""
    config = config or BridgeConfig()
    state = new_session(instance, config.session())
    first = initial_observation(state)
    entries = []
    try:
        transport.send(encode("TASK", config.echo()))
        transport.send(encode("TASK", render_instance(instance, config.mode)))
        transport.send(encode("OBS", first))
        while not state.outcome.decided:
            line = transport.recv()
            state, fb, _ = apply_text(state, line)
            entries.append((line.strip(), fb))
            transport.send(encode("OBS" if fb.ok else "ERR", fb.text))
            if fb.ok and fb.hint:
                transport.send(encode("HINT", fb.hint))
    except TransportClosed:
        if not state.outcome.decided:
            state = replace(state, outcome=failure(FailureReason.AGENT_ABORTED))
    transcript = Transcript(instance, first, tuple(entries), state)
    if reference is None:
        reference = reference_transcript(instance)
    report = evaluate(instance, transcript, reference) if reference is not None else None
    try:
        transport.send(encode("END", end_payload(transcript, report)))
    except TransportClosed:
        pass
    return SessionResult(transcript, report)


def scripted_agent(plan: str | Path | Iterable[str]) -> Agent:
    """An agent that sends the commands of a plan file in order, then ``Finish``.

    The plan is parsed up front, so a malformed file fails before any session
    starts.  Once the script runs out the agent hangs up.
    """
    if isinstance(plan, Path) or (isinstance(plan, str) and "\n" not in plan and Path(plan).is_file()):
        text = Path(plan).read_text()
    elif isinstance(plan, str):
        text = plan
    else:
        text = "\n".join(plan)
    commands = [str(c) for c in parse_plan_text(text)]
    if not commands or commands[-1] != "Finish":
        commands.append("Finish")
    queue = iter(commands)

    def agent(_messages: list[str]) -> str | None:
        return next(queue, None)

    return agent


def serve_stdio(instance: Instance, config: BridgeConfig | None = None, stdin=None, stdout=None) -> SessionResult:
    return serve_session(instance, StreamTransport(stdin or sys.stdin, stdout or sys.stdout), config)


def serve_process(instance: Instance, argv: list[str], config: BridgeConfig | None = None,
                  reference: Transcript | None = None) -> SessionResult:
    """Run an agent program as a child process talking the protocol on its stdio."""
    proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1)
    try:
        return serve_session(instance, StreamTransport(proc.stdout, proc.stdin), config, reference)
    finally:
        for f in (proc.stdin, proc.stdout):
            try:
                f.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()


def serve_tcp(instance: Instance, host: str = "127.0.0.1", port: int = 0,
              config: BridgeConfig | None = None, sessions: int | None = None, on_ready=None):
    """Serve one independent session per TCP connection.

    Stops after ``sessions`` connections when given; ``on_ready`` receives the
    bound ``(host, port)``.  Returns the finished session results.
    """
    results: list[SessionResult] = []
    reference = reference_transcript(instance)

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            transport = StreamTransport(_text(self.rfile), _text(self.wfile))
            results.append(serve_session(instance, transport, config, reference))

    with socketserver.ThreadingTCPServer((host, port), Handler) as server:
        # a bounded server waits for its sessions before returning their results
        server.daemon_threads = sessions is None
        if on_ready is not None:
            on_ready(server.server_address)
        if sessions is None:
            server.serve_forever()
        else:
            for _ in range(sessions):
                server.handle_request()
    return results


def _text(stream):
    return io.TextIOWrapper(stream, encoding="utf-8", newline="\n", write_through=True)


def connect(host: str, port: int) -> StreamTransport:
    """Client side of a TCP session, for agents written in Python."""
    sock = socket.create_connection((host, port))
    f = sock.makefile("rw", encoding="utf-8", newline="\n")
    return StreamTransport(f, f, on_close=sock.close)
