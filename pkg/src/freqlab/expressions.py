"""Tiny arithmetic expression grammar for config-defined scalar fields.

Supported: numbers, + - * / ^, parentheses, unary minus, the functions
exp/sin/cos, and the variables x1..xN plus s (the solution value slot).
Expressions compile to closures that evaluate on numpy arrays.
"""

import re

import numpy as np

__all__ = ["ExpressionError", "compile_expression"]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)

_FUNCTIONS = {"exp": np.exp, "sin": np.sin, "cos": np.cos}


class ExpressionError(ValueError):
    """Raised for syntax errors or unknown names in a field expression."""


def _tokenize(text):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"bad character in expression at: {text[pos:]!r}")
        if m.lastgroup == "num":
            out.append(("num", float(m.group("num"))))
        elif m.lastgroup == "name":
            out.append(("name", m.group("name")))
        else:
            out.append(("op", m.group("op")))
        pos = m.end()
    out.append(("end", None))
    return out


class _Parser:
    # precedence: +- (10) < */ (20) < unary minus (30) < ^ (40, right-assoc)

    def __init__(self, tokens, variables):
        self.toks = tokens
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def parse(self):
        node = self.expr(0)
        if self.peek()[0] != "end":
            raise ExpressionError(f"trailing input near token {self.peek()!r}")
        return node

    def expr(self, min_bp):
        node = self.atom()
        while True:
            kind, val = self.peek()
            if kind != "op" or val not in "+-*/^":
                break
            bp = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}[val]
            if bp < min_bp:
                break
            self.next()
            rhs = self.expr(bp if val == "^" else bp + 1)
            node = ("bin", val, node, rhs)
        return node

    def atom(self):
        kind, val = self.next()
        if kind == "num":
            return ("const", val)
        if kind == "op" and val == "-":
            return ("neg", self.expr(30))
        if kind == "op" and val == "+":
            return self.expr(30)
        if kind == "op" and val == "(":
            node = self.expr(0)
            kind, val = self.next()
            if (kind, val) != ("op", ")"):
                raise ExpressionError("missing closing parenthesis")
            return node
        if kind == "name":
            if val in _FUNCTIONS:
                kind2, val2 = self.next()
                if (kind2, val2) != ("op", "("):
                    raise ExpressionError(f"function {val!r} needs parentheses")
                arg = self.expr(0)
                kind2, val2 = self.next()
                if (kind2, val2) != ("op", ")"):
                    raise ExpressionError(f"unclosed call to {val!r}")
                return ("call", val, arg)
            if val in self.variables:
                return ("var", val)
            raise ExpressionError(
                f"unknown name {val!r}; allowed: {sorted(self.variables)} "
                f"and functions {sorted(_FUNCTIONS)}"
            )
        raise ExpressionError(f"unexpected token {val!r}")


def _evaluate(node, env):
    tag = node[0]
    if tag == "const":
        return node[1]
    if tag == "var":
        return env[node[1]]
    if tag == "neg":
        return -_evaluate(node[1], env)
    if tag == "call":
        return _FUNCTIONS[node[1]](_evaluate(node[2], env))
    op, lhs, rhs = node[1], _evaluate(node[2], env), _evaluate(node[3], env)
    if op == "+":
        return lhs + rhs
    if op == "-":
        return lhs - rhs
    if op == "*":
        return lhs * rhs
    if op == "/":
        return lhs / rhs
    return lhs ** rhs


def compile_expression(text, dim, with_s=False):
    """Compile `text` into fn(x, s=None) evaluating on points.

    `x` is an array of shape (..., dim); variables x1..x<dim> bind to its
    components.  When `with_s`, the extra variable s binds to the second
    argument.
    """
    variables = {f"x{i + 1}" for i in range(dim)}
    if with_s:
        variables.add("s")
    tree = _Parser(_tokenize(text), variables).parse()

    def fn(x, s=None):
        x = np.asarray(x, dtype=float)
        env = {f"x{i + 1}": x[..., i] for i in range(dim)}
        if with_s:
            env["s"] = s
        val = _evaluate(tree, env)
        return np.broadcast_to(val, x.shape[:-1]).astype(float, copy=True) \
            if np.ndim(val) == 0 else val

    fn.source = text
    return fn
