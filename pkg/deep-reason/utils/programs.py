"""
Semantic programs: construction, S-expression codec, validation, execution
"""
from typing import Dict, List, Optional, Sequence

from errors import AmbiguityError, ContractError, ProgramParseError
from schemas.program import Direction, Operation, ProgramNode, TemplateId
from schemas.world import SceneGraph, SceneObject
from utils.vocab import ATTRIBUTE_TYPES, ATTRIBUTE_VALUES, MAX_COUNT

ROOT_OPS = (Operation.EXIST, Operation.QUERY, Operation.COMPARE_ATTR, Operation.COUNT)
SET_OPS = (Operation.SELECT, Operation.FILTER, Operation.RELATE)

ARITY = {
    Operation.SELECT: 0,
    Operation.FILTER: 1,
    Operation.RELATE: 1,
    Operation.EXIST: 1,
    Operation.QUERY: 1,
    Operation.COMPARE_ATTR: 2,
    Operation.COUNT: 1,
}


# Builders

def select(**constraints: str) -> ProgramNode:
    return ProgramNode(op=Operation.SELECT, constraints=dict(constraints))


def filter_(attribute: str, value: str, child: ProgramNode) -> ProgramNode:
    return ProgramNode(op=Operation.FILTER, attribute=attribute, value=value, children=[child])


def relate(direction: str, child: ProgramNode) -> ProgramNode:
    return ProgramNode(op=Operation.RELATE, direction=Direction(direction), children=[child])


def exist(child: ProgramNode) -> ProgramNode:
    return ProgramNode(op=Operation.EXIST, children=[child])


def query(attribute: str, child: ProgramNode) -> ProgramNode:
    return ProgramNode(op=Operation.QUERY, attribute=attribute, children=[child])


def compare_attr(attribute: str, a: ProgramNode, b: ProgramNode) -> ProgramNode:
    return ProgramNode(op=Operation.COMPARE_ATTR, attribute=attribute, children=[a, b])


def count(child: ProgramNode) -> ProgramNode:
    return ProgramNode(op=Operation.COUNT, children=[child])


def filter_chain(constraints: Dict[str, str], child: ProgramNode) -> ProgramNode:
    """One filter per constraint, alphabetical from the inside out"""
    node = child
    for attribute in sorted(constraints):
        node = filter_(attribute, constraints[attribute], node)
    return node


# Codec

def serialize_program(program: ProgramNode) -> List[str]:
    """Canonical S-expression tokens"""
    tokens = ["(", program.op.value]
    if program.op == Operation.SELECT:
        for attribute in sorted(program.constraints):
            tokens += [f"{attribute}=", program.constraints[attribute]]
    elif program.op == Operation.FILTER:
        tokens += [f"{program.attribute}=", program.value]
    elif program.op == Operation.RELATE:
        tokens.append(program.direction.value)
    elif program.op in (Operation.QUERY, Operation.COMPARE_ATTR):
        tokens.append(program.attribute)
    for child in program.children:
        tokens += serialize_program(child)
    tokens.append(")")
    return tokens


def program_text(program: ProgramNode) -> str:
    return " ".join(serialize_program(program))


class _Parser:
    """Recursive descent over the token stream; positions are 0-based token indices"""

    def __init__(self, tokens: Sequence[str]):
        self.tokens = list(tokens)
        self.pos = 0

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self, expected: str) -> str:
        token = self.peek()
        if token is None:
            raise ProgramParseError(f"Unexpected end of program, expected {expected}", self.pos)
        self.pos += 1
        return token

    def expect(self, literal: str) -> None:
        at = self.pos
        if self.next(f"'{literal}'") != literal:
            raise ProgramParseError(f"Expected '{literal}', got {self.tokens[at]!r}", at)

    def attribute_type(self) -> str:
        at = self.pos
        token = self.next("an attribute type")
        if token not in ATTRIBUTE_TYPES:
            raise ProgramParseError(f"Expected an attribute type, got {token!r}", at)
        return token

    def attribute_value(self, attribute: str) -> str:
        at = self.pos
        token = self.next(f"a {attribute} value")
        if token not in ATTRIBUTE_VALUES[attribute]:
            raise ProgramParseError(f"{token!r} is not a {attribute} value", at)
        return token

    def constraint_key(self) -> Optional[str]:
        token = self.peek()
        if token is not None and token.endswith("=") and token[:-1] in ATTRIBUTE_TYPES:
            return token[:-1]
        return None

    def node(self) -> ProgramNode:
        self.expect("(")
        at = self.pos
        head = self.next("an operation")
        try:
            op = Operation(head)
        except ValueError:
            raise ProgramParseError(f"Unknown operation {head!r}", at)

        fields = {}
        if op == Operation.SELECT:
            constraints = {}
            while self.peek() not in (")", None):
                key_at = self.pos
                key = self.constraint_key()
                if key is None:
                    raise ProgramParseError(f"Expected a constraint like 'color=', got {self.peek()!r}", key_at)
                if key in constraints:
                    raise ProgramParseError(f"Repeated constraint {key!r}", key_at)
                self.pos += 1
                constraints[key] = self.attribute_value(key)
            fields["constraints"] = constraints
        elif op == Operation.FILTER:
            key_at = self.pos
            key = self.constraint_key()
            if key is None:
                raise ProgramParseError(f"filter needs an attribute=value, got {self.peek()!r}", key_at)
            self.pos += 1
            fields["attribute"] = key
            fields["value"] = self.attribute_value(key)
        elif op == Operation.RELATE:
            dir_at = self.pos
            token = self.next("a direction")
            try:
                fields["direction"] = Direction(token)
            except ValueError:
                raise ProgramParseError(f"Unknown direction {token!r}", dir_at)
        elif op in (Operation.QUERY, Operation.COMPARE_ATTR):
            fields["attribute"] = self.attribute_type()

        children = []
        for _ in range(ARITY[op]):
            if self.peek() != "(":
                raise ProgramParseError(f"{op.value} expects {ARITY[op]} argument(s)", self.pos)
            children.append(self.node())
        self.expect(")")
        return ProgramNode(op=op, children=children, **fields)


def parse_program(tokens: Sequence[str]) -> ProgramNode:
    """Parse an S-expression token stream; constraint order inside select is free"""
    if isinstance(tokens, str):
        tokens = tokens.split()
    parser = _Parser(tokens)
    program = parser.node()
    if parser.pos != len(parser.tokens):
        raise ProgramParseError("Trailing tokens after the program", parser.pos)
    try:
        validate_program(program)
    except ContractError as e:
        raise ProgramParseError(e.detail, 0)
    return program


# Validation

def _validate_node(node: ProgramNode, is_root: bool) -> None:
    if is_root and node.op not in ROOT_OPS:
        raise ContractError(f"Program root must be one of {[op.value for op in ROOT_OPS]}, got {node.op.value}")
    if not is_root and node.op not in SET_OPS:
        raise ContractError(f"{node.op.value} can only appear at the root")
    if len(node.children) != ARITY[node.op]:
        raise ContractError(f"{node.op.value} takes {ARITY[node.op]} children, got {len(node.children)}")
    if node.op == Operation.SELECT:
        for attribute, value in node.constraints.items():
            if attribute not in ATTRIBUTE_TYPES or value not in ATTRIBUTE_VALUES[attribute]:
                raise ContractError(f"Invalid select constraint {attribute}={value}")
    elif node.constraints:
        raise ContractError(f"Only select carries constraints, not {node.op.value}")
    if node.op == Operation.FILTER and (node.attribute not in ATTRIBUTE_TYPES
                                        or node.value not in ATTRIBUTE_VALUES[node.attribute]):
        raise ContractError(f"Invalid filter {node.attribute}={node.value}")
    if node.op in (Operation.QUERY, Operation.COMPARE_ATTR) and node.attribute not in ATTRIBUTE_TYPES:
        raise ContractError(f"{node.op.value} needs an attribute type, got {node.attribute!r}")
    if node.op == Operation.RELATE and node.direction is None:
        raise ContractError("relate needs a direction")
    for child in node.children:
        _validate_node(child, is_root=False)


def validate_program(program: ProgramNode) -> None:
    """Root kind, arities, select leaves and attribute vocabularies"""
    _validate_node(program, is_root=True)


# Execution

def on_side(candidate: SceneObject, referent: SceneObject, direction: Direction) -> bool:
    """Strict centre comparison; y grows downward"""
    cx, cy = candidate.center
    rx, ry = referent.center
    if direction == Direction.LEFT:
        return cx < rx
    if direction == Direction.RIGHT:
        return cx > rx
    if direction == Direction.ABOVE:
        return cy < ry
    return cy > ry


def matches(obj: SceneObject, constraints: Dict[str, str]) -> bool:
    return all(obj.attribute(name) == value for name, value in constraints.items())


def _singleton(objects: List[SceneObject], op: Operation) -> SceneObject:
    if len(objects) != 1:
        raise AmbiguityError(f"{op.value} needs exactly one object, got {len(objects)}")
    return objects[0]


def _objects(node: ProgramNode, scene: SceneGraph) -> List[SceneObject]:
    if node.op == Operation.SELECT:
        return [o for o in scene.objects if matches(o, node.constraints)]
    if node.op == Operation.FILTER:
        return [o for o in _objects(node.children[0], scene) if o.attribute(node.attribute) == node.value]
    if node.op == Operation.RELATE:
        referent = _singleton(_objects(node.children[0], scene), node.op)
        return [o for o in scene.objects if o.id != referent.id and on_side(o, referent, node.direction)]
    raise ContractError(f"{node.op.value} does not produce an object set")


def execute_program(program: ProgramNode, scene: SceneGraph) -> str:
    """Answer label of a program on a scene"""
    validate_program(program)
    if program.op == Operation.EXIST:
        return "yes" if _objects(program.children[0], scene) else "no"
    if program.op == Operation.COUNT:
        found = len(_objects(program.children[0], scene))
        if found > MAX_COUNT:
            raise ContractError(f"Count {found} exceeds the answer vocabulary")
        return str(found)
    if program.op == Operation.QUERY:
        return _singleton(_objects(program.children[0], scene), program.op).attribute(program.attribute)
    a = _singleton(_objects(program.children[0], scene), program.op)
    b = _singleton(_objects(program.children[1], scene), program.op)
    return "yes" if a.attribute(program.attribute) == b.attribute(program.attribute) else "no"


def template_of(program: ProgramNode) -> TemplateId:
    """Template id recovered from the program's shape"""
    validate_program(program)
    child = program.children[0]
    if program.op == Operation.COUNT:
        return TemplateId.COUNT
    if program.op == Operation.COMPARE_ATTR:
        return TemplateId.COMPARE
    if program.op == Operation.QUERY:
        return TemplateId.RELATE_QUERY if child.op == Operation.RELATE else TemplateId.QUERY_ATTRIBUTE
    while child.op == Operation.FILTER:
        child = child.children[0]
    return TemplateId.SPATIAL_EXIST if child.op == Operation.RELATE else TemplateId.EXIST
