import argparse
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from app.config import VERSION, Settings, get_settings
from app.errors import InvalidArgumentError, MetaDecompError, ParseError
from app.models.cards import CardinalityProvider
from app.models.hypergraph import Hypergraph
from app.schemas.cards import parse_cards
from app.schemas.query import parse_query

logger = logging.getLogger(__name__)

QUERY_SUFFIXES = (".json", ".q", ".txt")


@dataclass
class CommandResult:
    """A handler's report. text replaces the JSON rendering for dot, sql and csv output."""
    payload: Dict[str, Any]
    exit_code: int = 0
    text: Optional[str] = None


Handler = Callable[[argparse.Namespace, Settings], Any]


@dataclass
class Command:
    name: str
    help: str
    handler: Handler
    arguments: Sequence[Tuple[tuple, dict]]
    batch: bool


def arg(*flags: str, **kwargs) -> Tuple[tuple, dict]:
    return flags, kwargs


class CommandRouter:
    """Collects subcommands the way an APIRouter collects endpoints."""

    def __init__(self):
        self.commands: List[Command] = []

    def command(self, name: str, help: str, arguments: Sequence[Tuple[tuple, dict]] = (), batch: bool = False):
        def register(handler: Handler) -> Handler:
            self.commands.append(Command(name, help, handler, list(arguments), batch))
            return handler
        return register


# ------------------------------
# Input helpers shared by routes
# ------------------------------
def read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise InvalidArgumentError(f"no such file: {path}")
    except (OSError, UnicodeDecodeError) as e:
        raise ParseError(str(e), source=path)


def load_query(path: str, require_connected: bool = True) -> Hypergraph:
    return parse_query(read_text(path), source=path, require_connected=require_connected)


def load_cards(path: str, H: Hypergraph, estimate: bool = False) -> CardinalityProvider:
    return parse_cards(read_text(path), H, source=path, estimate=estimate)


def dumps(payload: Any) -> str:
    return json.dumps(payload, indent=2, default=str)


# ------------------------------
# Application
# ------------------------------
class MetaDecompCLI:
    def __init__(self, prog: str = "metadecomp"):
        self.prog = prog
        self.commands: Dict[str, Command] = {}

    def include_router(self, router: CommandRouter) -> None:
        for command in router.commands:
            if command.name in self.commands:
                raise InvalidArgumentError(f"command {command.name} registered twice")
            self.commands[command.name] = command

    def parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog=self.prog, description="Meta-decompositions of acyclic join queries")
        parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
        sub = parser.add_subparsers(dest="command", required=True)
        for command in self.commands.values():
            p = sub.add_parser(command.name, help=command.help, description=command.help)
            for flags, kwargs in command.arguments:
                p.add_argument(*flags, **kwargs)
        return parser

    def _call(self, command: Command, args: argparse.Namespace, settings: Settings) -> CommandResult:
        result = command.handler(args, settings)
        if not isinstance(result, CommandResult):
            result = CommandResult(result)
        result.payload.setdefault("version", VERSION)
        return result

    def _batch(self, command: Command, args: argparse.Namespace, settings: Settings) -> CommandResult:
        files = sorted(p for p in Path(args.query).iterdir() if p.is_file() and p.suffix in QUERY_SUFFIXES)
        results, exit_code = [], 0
        for file in files:
            single = argparse.Namespace(**vars(args))
            single.query = str(file)
            if hasattr(single, "format") and single.format not in ("json", "count"):
                single.format = "json"
            try:
                result = self._call(command, single, settings)
                entry = {"file": file.name, **result.payload}
                code = result.exit_code
            except MetaDecompError as e:
                entry = {"file": file.name, **e.to_report()}
                code = e.exit_code
            entry.pop("version", None)
            results.append(entry)
            exit_code = max(exit_code, code)
            logger.info("%s %s: exit %d", command.name, file.name, code)
        return CommandResult({"results": results, "version": VERSION}, exit_code)

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        try:
            args = self.parser().parse_args(argv)
        except SystemExit as e:
            return int(e.code or 0)
        try:
            settings = get_settings()
            command = self.commands[args.command]
            if command.batch and Path(args.query).is_dir():
                result = self._batch(command, args, settings)
            else:
                result = self._call(command, args, settings)
        except MetaDecompError as e:
            logger.debug("%s failed: %s", args.command, e.detail)
            print(dumps(e.to_report()))
            return e.exit_code
        print(result.text if result.text is not None else dumps(result.payload), end="" if result.text else "\n")
        return result.exit_code
