"""Recursive-descent parser for OpenFOAM dictionary text.

Comments are discarded. ``#`` directives are preserved as opaque entries.
``nonuniform`` literals are captured as raw spans with an entry count only.
"""

from __future__ import annotations

from typing import List, Optional, Tuple, Union

from .values import (
    DimensionVector,
    Dimensioned,
    Directive,
    FoamDict,
    FoamList,
    FoamSeq,
    FoamValue,
    KeywordEntry,
    NonuniformField,
    QuotedString,
    UniformField,
)


class FoamSyntaxError(Exception):
    """Parse failure with 1-based line/column of the offending text."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


_PUNCT = "{}()[];"
_WORD_START_EXTRA = "_$#~/.\\<>"
_WORD_CONT_EXTRA = "_$#~/.\\<>,:+-*|&=!%^'"


class _Lexer:
    """Tokenizer over dictionary text; comments are skipped here."""

    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos >= len(self.text):
                return
            if self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def error(self, message: str) -> FoamSyntaxError:
        return FoamSyntaxError(message, self.line, self.col)

    def skip_ws(self) -> None:
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch in " \t\r\n\f\v":
                self._advance()
            elif ch == "/" and text.startswith("//", self.pos):
                while self.pos < len(text) and text[self.pos] != "\n":
                    self._advance()
            elif ch == "/" and text.startswith("/*", self.pos):
                end = text.find("*/", self.pos + 2)
                if end < 0:
                    raise self.error("unterminated block comment")
                self._advance(end + 2 - self.pos)
            else:
                return

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek_char(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take_punct(self, expected: str) -> None:
        ch = self.peek_char()
        if ch != expected:
            found = repr(ch) if ch else "end of input"
            raise self.error(f"expected {expected!r}, found {found}")
        self._advance()

    def try_punct(self, expected: str) -> bool:
        if self.peek_char() == expected:
            self._advance()
            return True
        return False

    def take_quoted(self) -> QuotedString:
        self.take_punct('"')
        start = self.pos
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch == "\\":
                self._advance(2)
            elif ch == '"':
                raw = text[start : self.pos]
                self._advance()
                return QuotedString(raw)
            else:
                self._advance()
        raise self.error("unterminated quoted string")

    def take_word(self) -> str:
        """A bare token; trailing ``(...)`` groups glued to it are included."""
        self.skip_ws()
        text = self.text
        start = self.pos
        depth = 0
        # numeric-led tokens never glue "(...)": "4(...)" is a counted list,
        # while "div(phi,U)" is one scheme token
        allow_parens = self.pos < len(text) and not _looks_numeric(text[self.pos])
        while self.pos < len(text):
            ch = text[self.pos]
            if depth == 0:
                if ch == "/" and text[self.pos + 1 : self.pos + 2] in ("/", "*"):
                    break  # comment glued to the token
                if ch.isalnum() or ch in _WORD_CONT_EXTRA:
                    self._advance()
                elif ch == "(" and allow_parens:
                    depth += 1
                    self._advance()
                else:
                    break
            else:
                if ch == "(":
                    depth += 1
                elif ch == ")":
                    depth -= 1
                elif ch in ";{}":
                    raise self.error("unbalanced '(' in token")
                self._advance()
        if depth != 0:
            raise self.error("unbalanced '(' in token")
        if self.pos == start:
            raise self.error(f"expected a token, found {text[self.pos:self.pos+1]!r}")
        return text[start : self.pos]

    def rest_of_line(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] != "\n":
            self._advance()
        return self.text[start : self.pos].strip()

    def raw_balanced_parens(self) -> str:
        """Consume from the next '(' through its matching ')', verbatim."""
        self.take_punct("(")
        start = self.pos - 1
        depth = 1
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth == 0:
                    self._advance()
                    return text[start : self.pos]
            self._advance()
        raise self.error("unbalanced '(' in field data")


def _to_number(word: str) -> Optional[Union[int, float]]:
    try:
        return int(word)
    except ValueError:
        pass
    try:
        return float(word)
    except ValueError:
        return None


def _looks_numeric(ch: str) -> bool:
    return ch.isdigit() or ch in "+-."


class _Parser:
    def __init__(self, text: str) -> None:
        self.lex = _Lexer(text)

    # --- entries -----------------------------------------------------------

    def parse_file(self) -> FoamDict:
        entries: List[Tuple[Optional[str], FoamValue]] = []
        seen: set = set()
        while not self.lex.at_end():
            entry = self._parse_entry(top_level=True)
            key = entry[0]
            if key is not None:
                if key in seen:
                    raise self.lex.error(f"duplicate keyword {key!r}")
                seen.add(key)
            entries.append(entry)
        return FoamDict(entries)

    def _parse_entry(self, top_level: bool = False) -> Tuple[Optional[str], FoamValue]:
        ch = self.lex.peek_char()
        if top_level and (_looks_numeric(ch) or ch == "("):
            # standalone data block (e.g. the patch list of a polyMesh boundary file)
            return (None, self._parse_atom())
        if ch == '"':
            keyword: str = self.lex.take_quoted()
        else:
            keyword = self.lex.take_word()
        if keyword.startswith("#"):
            return (None, Directive(keyword, self.lex.rest_of_line()))
        if self.lex.peek_char() == "{":
            return (keyword, self._parse_dict_body())
        value = self._parse_value_run()
        self._expect_semicolon(keyword)
        return (keyword, value)

    def _expect_semicolon(self, keyword: str) -> None:
        if not self.lex.try_punct(";"):
            raise self.lex.error(f"missing ';' after entry {keyword!r}")

    def _parse_dict_body(self) -> FoamDict:
        self.lex.take_punct("{")
        entries: List[Tuple[Optional[str], FoamValue]] = []
        seen: set = set()
        while True:
            if self.lex.at_end():
                raise self.lex.error("missing '}' before end of input")
            if self.lex.try_punct("}"):
                return FoamDict(entries)
            entry = self._parse_entry()
            key = entry[0]
            if key is not None:
                if key in seen:
                    raise self.lex.error(f"duplicate keyword {key!r}")
                seen.add(key)
            entries.append(entry)

    # --- values ------------------------------------------------------------

    def _parse_value_run(self) -> FoamValue:
        atoms: List[FoamValue] = []
        while True:
            ch = self.lex.peek_char()
            if ch == ";":
                break
            if ch == "":
                raise self.lex.error("missing ';' before end of input")
            if ch in ")}":
                raise self.lex.error(f"unexpected {ch!r} in value")
            atoms.append(self._parse_atom())
        if not atoms:
            return None
        folded = self._fold_dimensioned(atoms)
        if folded is not None:
            return folded
        if len(atoms) == 1:
            return atoms[0]
        return FoamSeq(tuple(atoms))

    @staticmethod
    def _fold_dimensioned(atoms: List[FoamValue]) -> Optional[FoamValue]:
        if len(atoms) == 2 and isinstance(atoms[0], DimensionVector):
            magnitude = _magnitude_of(atoms[1])
            if magnitude is not None:
                return Dimensioned(atoms[0], magnitude)
        if (
            len(atoms) == 3
            and isinstance(atoms[0], str)
            and isinstance(atoms[1], DimensionVector)
        ):
            magnitude = _magnitude_of(atoms[2])
            if magnitude is not None:
                return Dimensioned(atoms[1], magnitude, name=atoms[0])
        return None

    def _parse_atom(self) -> FoamValue:
        ch = self.lex.peek_char()
        if ch == "(":
            return self._parse_list(count=None)
        if ch == "[":
            return self._parse_dimension_set()
        if ch == "{":
            return self._parse_dict_body()
        if ch == '"':
            return self.lex.take_quoted()
        word = self.lex.take_word()
        number = _to_number(word)
        if number is not None:
            if isinstance(number, int) and self.lex.peek_char() == "(":
                return self._parse_list(count=number)
            return number
        if word == "uniform":
            return self._parse_uniform()
        if word == "nonuniform":
            return self._parse_nonuniform()
        return word

    def _parse_list(self, count: Optional[int]) -> FoamList:
        self.lex.take_punct("(")
        items: List[FoamValue] = []
        while True:
            ch = self.lex.peek_char()
            if ch == "":
                raise self.lex.error("missing ')' before end of input")
            if self.lex.try_punct(")"):
                return FoamList(tuple(items), count=count)
            if ch == '"':
                items.append(self.lex.take_quoted())
                continue
            if ch in "([{":
                items.append(self._parse_atom())
                continue
            word = self.lex.take_word()
            number = _to_number(word)
            if number is not None:
                if isinstance(number, int) and self.lex.peek_char() == "(":
                    items.append(self._parse_list(count=number))
                else:
                    items.append(number)
                continue
            if word == "uniform":
                items.append(self._parse_uniform())
                continue
            if word == "nonuniform":
                items.append(self._parse_nonuniform())
                continue
            if self.lex.peek_char() == "{":
                items.append(KeywordEntry(word, self._parse_dict_body()))
            else:
                items.append(word)

    def _parse_dimension_set(self) -> DimensionVector:
        line, col = self.lex.line, self.lex.col
        self.lex.take_punct("[")
        exponents: List[int] = []
        while not self.lex.try_punct("]"):
            if self.lex.at_end():
                raise self.lex.error("missing ']' in dimension set")
            word = self.lex.take_word()
            try:
                exponents.append(int(word))
            except ValueError:
                raise FoamSyntaxError(
                    f"malformed dimension set: non-integer exponent {word!r}", line, col
                ) from None
            if len(exponents) > 7:
                raise FoamSyntaxError("malformed dimension set: more than 7 exponents", line, col)
        if len(exponents) not in (5, 7):
            raise FoamSyntaxError(
                f"malformed dimension set: expected 5 or 7 exponents, got {len(exponents)}",
                line,
                col,
            )
        exponents.extend([0] * (7 - len(exponents)))
        return DimensionVector(tuple(exponents))  # type: ignore[arg-type]

    def _parse_uniform(self) -> UniformField:
        ch = self.lex.peek_char()
        if ch == "(":
            vec = self._parse_list(count=None)
            return UniformField(tuple(v for v in vec.items))  # type: ignore[misc]
        word = self.lex.take_word()
        number = _to_number(word)
        return UniformField(number if number is not None else word)

    def _parse_nonuniform(self) -> NonuniformField:
        list_type: Optional[str] = None
        declared: Optional[int] = None
        if self.lex.peek_char() not in "(0123456789":
            list_type = self.lex.take_word()
        if self.lex.peek_char() != "(":
            word = self.lex.take_word()
            number = _to_number(word)
            if not isinstance(number, int):
                raise self.lex.error(f"expected entry count in nonuniform field, got {word!r}")
            declared = number
        if declared == 0 and self.lex.peek_char() == ";":
            return NonuniformField(list_type, 0, "()")
        span = self.lex.raw_balanced_parens()
        count = declared if declared is not None else _count_span_entries(span)
        return NonuniformField(list_type, count, span)


def _magnitude_of(atom: FoamValue) -> Optional[Union[int, float, Tuple[float, ...]]]:
    if isinstance(atom, (int, float)):
        return atom
    if isinstance(atom, FoamList) and all(isinstance(v, (int, float)) for v in atom.items):
        return tuple(atom.items)  # type: ignore[arg-type]
    return None


def _count_span_entries(span: str) -> int:
    inner = span.strip()[1:-1]
    depth = 0
    count = 0
    in_item = False
    for ch in inner:
        if ch == "(":
            if depth == 0 and not in_item:
                count += 1
            in_item = False
            depth += 1
        elif ch == ")":
            depth -= 1
        elif depth == 0:
            if ch.isspace():
                in_item = False
            else:
                if not in_item:
                    count += 1
                in_item = True
    return count


def parse_dictionary(text: str) -> FoamDict:
    """Parse OpenFOAM dictionary text into its value tree."""
    return _Parser(text).parse_file()


def parse_value(text: str) -> FoamValue:
    """Parse a single value (no trailing ';'), mainly for tests and tooling."""
    parser = _Parser(text)
    atoms: List[FoamValue] = []
    while not parser.lex.at_end():
        atoms.append(parser._parse_atom())
    if not atoms:
        return None
    folded = parser._fold_dimensioned(atoms)
    if folded is not None:
        return folded
    return atoms[0] if len(atoms) == 1 else FoamSeq(tuple(atoms))
