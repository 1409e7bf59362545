"""
Question templates, their generator and the grammar-based translator
"""
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import TranslationError, UninstantiableTemplate
from schemas.program import Direction, ProgramNode, QAItem, TemplateId
from schemas.world import SceneGraph, SceneObject
from utils import programs as P
from utils.vocab import ATTRIBUTE_TYPES, ATTRIBUTE_VALUES, PLURAL_SHAPES

# Word order of a noun phrase before its head
MODIFIER_ORDER = ("size", "color", "material")

RELATION_WORDS: Dict[Direction, List[str]] = {
    Direction.LEFT: ["left", "of"],
    Direction.RIGHT: ["right", "of"],
    Direction.ABOVE: ["above"],
    Direction.BELOW: ["below"],
}

SINGULAR_SHAPES = {plural: shape for shape, plural in PLURAL_SHAPES.items()}

DIRECTION_WORDS = {d.value for d in Direction}

# Random descriptions tried before a "no" exist question is given up
NEGATIVE_DRAWS = 50


# Noun phrases

def noun_phrase(description: Dict[str, str], plural: bool = False) -> List[str]:
    """size color material (shape | object), e.g. ['small', 'red', 'cube']"""
    tokens = [description[name] for name in MODIFIER_ORDER if name in description]
    if "shape" in description:
        tokens.append(PLURAL_SHAPES[description["shape"]] if plural else description["shape"])
    else:
        tokens.append("objects" if plural else "object")
    return tokens


def parse_noun_phrase(tokens: Sequence[str], plural: bool, question: Sequence[str]) -> Dict[str, str]:
    if not tokens:
        raise TranslationError("Missing noun phrase", list(question))
    *modifiers, head = tokens
    description: Dict[str, str] = {}
    if plural and head in SINGULAR_SHAPES:
        description["shape"] = SINGULAR_SHAPES[head]
    elif not plural and head in ATTRIBUTE_VALUES["shape"]:
        description["shape"] = head
    elif head != ("objects" if plural else "object"):
        raise TranslationError(f"{head!r} is not a noun", list(question))
    slot = 0
    for word in modifiers:
        while slot < len(MODIFIER_ORDER) and word not in ATTRIBUTE_VALUES[MODIFIER_ORDER[slot]]:
            slot += 1
        if slot == len(MODIFIER_ORDER):
            raise TranslationError(f"Unexpected modifier {word!r}", list(question))
        description[MODIFIER_ORDER[slot]] = word
        slot += 1
    return description


def unique_descriptions(obj: SceneObject, scene: SceneGraph, exclude: Sequence[str] = ()) -> List[Dict[str, str]]:
    """Every non-empty attribute subset that singles out `obj` in the scene"""
    names = [name for name in ATTRIBUTE_TYPES if name not in exclude]
    found = []
    for size in range(1, len(names) + 1):
        for subset in combinations(names, size):
            description = {name: obj.attribute(name) for name in subset}
            if [o.id for o in scene.objects if P.matches(o, description)] == [obj.id]:
                found.append(description)
    return found


def _pick(rng: np.random.Generator, options: Sequence):
    return options[int(rng.integers(len(options)))]


def _random_subset(obj: SceneObject, rng: np.random.Generator, allow_empty: bool) -> Dict[str, str]:
    keep = rng.random(len(ATTRIBUTE_TYPES)) < 0.5
    if not allow_empty and not keep.any():
        keep[int(rng.integers(len(ATTRIBUTE_TYPES)))] = True
    return {name: obj.attribute(name) for name, k in zip(ATTRIBUTE_TYPES, keep) if k}


def _random_description(rng: np.random.Generator, allow_empty: bool) -> Dict[str, str]:
    keep = rng.random(len(ATTRIBUTE_TYPES)) < 0.5
    if not allow_empty and not keep.any():
        keep[int(rng.integers(len(ATTRIBUTE_TYPES)))] = True
    return {name: _pick(rng, ATTRIBUTE_VALUES[name]) for name, k in zip(ATTRIBUTE_TYPES, keep) if k}


def _yes_no(rng: np.random.Generator) -> str:
    return "yes" if rng.random() < 0.5 else "no"


def _skip(template: TemplateId, scene: SceneGraph, reason: str):
    raise UninstantiableTemplate(f"{template.value} on {scene.image_id}: {reason}")


# Templates

def _query_attribute(scene: SceneGraph, rng: np.random.Generator) -> Tuple[List[str], ProgramNode]:
    for index in rng.permutation(len(scene.objects)):
        obj = scene.objects[index]
        for a in rng.permutation(len(ATTRIBUTE_TYPES)):
            attribute = ATTRIBUTE_TYPES[a]
            descriptions = unique_descriptions(obj, scene, exclude=(attribute,))
            if descriptions:
                description = _pick(rng, descriptions)
                question = ["what", attribute, "is", "the"] + noun_phrase(description)
                return question, P.query(attribute, P.select(**description))
    _skip(TemplateId.QUERY_ATTRIBUTE, scene, "no object has a unique description")


def _exist(scene: SceneGraph, rng: np.random.Generator) -> Tuple[List[str], ProgramNode]:
    if _yes_no(rng) == "yes":
        description = _random_subset(_pick(rng, scene.objects), rng, allow_empty=False)
    else:
        for _ in range(NEGATIVE_DRAWS):
            description = _random_description(rng, allow_empty=False)
            if not any(P.matches(o, description) for o in scene.objects):
                break
        else:
            _skip(TemplateId.EXIST, scene, "no absent description found")
    return ["is", "there", "a"] + noun_phrase(description), P.exist(P.select(**description))


def _spatial_exist(scene: SceneGraph, rng: np.random.Generator) -> Tuple[List[str], ProgramNode]:
    answer = _yes_no(rng)
    described = {o.id: unique_descriptions(o, scene) for o in scene.objects}
    candidates = [
        (s, r, d)
        for s in scene.objects if described[s.id]
        for r in scene.objects if r.id != s.id and described[r.id]
        for d in Direction
        if P.on_side(s, r, d) == (answer == "yes")
    ]
    if not candidates:
        _skip(TemplateId.SPATIAL_EXIST, scene, f"no pair answers {answer}")
    subject, referent, direction = _pick(rng, candidates)
    subject_np = _pick(rng, described[subject.id])
    referent_np = _pick(rng, described[referent.id])
    question = (["is", "the"] + noun_phrase(subject_np) + RELATION_WORDS[direction]
                + ["the"] + noun_phrase(referent_np))
    program = P.exist(P.filter_chain(subject_np, P.relate(direction.value, P.select(**referent_np))))
    return question, program


def _relate_query(scene: SceneGraph, rng: np.random.Generator) -> Tuple[List[str], ProgramNode]:
    candidates = []
    for referent in scene.objects:
        descriptions = unique_descriptions(referent, scene)
        if not descriptions:
            continue
        for d in Direction:
            side = [o for o in scene.objects if o.id != referent.id and P.on_side(o, referent, d)]
            if len(side) == 1:
                candidates.append((referent, d, descriptions))
    if not candidates:
        _skip(TemplateId.RELATE_QUERY, scene, "no referent with exactly one neighbour on a side")
    referent, direction, descriptions = _pick(rng, candidates)
    attribute = _pick(rng, ATTRIBUTE_TYPES)
    description = _pick(rng, descriptions)
    question = (["what", attribute, "is", "the", "object"] + RELATION_WORDS[direction]
                + ["the"] + noun_phrase(description))
    return question, P.query(attribute, P.relate(direction.value, P.select(**description)))


def _compare(scene: SceneGraph, rng: np.random.Generator) -> Tuple[List[str], ProgramNode]:
    answer = _yes_no(rng)
    candidates = []
    for attribute in ATTRIBUTE_TYPES:
        for a in scene.objects:
            for b in scene.objects:
                if a.id == b.id or (a.attribute(attribute) == b.attribute(attribute)) != (answer == "yes"):
                    continue
                candidates.append((attribute, a, b))
    for index in rng.permutation(len(candidates)):
        attribute, a, b = candidates[index]
        a_descriptions = unique_descriptions(a, scene, exclude=(attribute,))
        b_descriptions = unique_descriptions(b, scene, exclude=(attribute,))
        if a_descriptions and b_descriptions:
            a_np, b_np = _pick(rng, a_descriptions), _pick(rng, b_descriptions)
            question = (["do", "the"] + noun_phrase(a_np) + ["and", "the"] + noun_phrase(b_np)
                        + ["have", "the", "same", attribute])
            return question, P.compare_attr(attribute, P.select(**a_np), P.select(**b_np))
    _skip(TemplateId.COMPARE, scene, f"no describable pair answers {answer}")


def _count(scene: SceneGraph, rng: np.random.Generator) -> Tuple[List[str], ProgramNode]:
    if rng.random() < 0.5:
        description = _random_subset(_pick(rng, scene.objects), rng, allow_empty=True)
    else:
        description = _random_description(rng, allow_empty=True)
    question = ["how", "many"] + noun_phrase(description, plural=True) + ["are", "there"]
    return question, P.count(P.select(**description))


TEMPLATES: Dict[TemplateId, Callable[[SceneGraph, np.random.Generator], Tuple[List[str], ProgramNode]]] = {
    TemplateId.QUERY_ATTRIBUTE: _query_attribute,
    TemplateId.EXIST: _exist,
    TemplateId.SPATIAL_EXIST: _spatial_exist,
    TemplateId.RELATE_QUERY: _relate_query,
    TemplateId.COMPARE: _compare,
    TemplateId.COUNT: _count,
}


def gen_question(scene: SceneGraph, template_id: TemplateId, rng: np.random.Generator,
                 qid: Optional[str] = None) -> QAItem:
    """Instantiate one template on a scene and attach its program and oracle answer.

    Raises UninstantiableTemplate when the scene cannot support the template;
    callers resample.
    """
    template_id = TemplateId(template_id)
    question, program = TEMPLATES[template_id](scene, rng)
    return QAItem(
        qid=qid or f"{scene.image_id}-{template_id.value}",
        image_id=scene.image_id,
        template=template_id,
        question=question,
        program=program,
        answer=P.execute_program(program, scene),
    )


# Translation

def _split_relation(tokens: List[str], question: List[str]) -> Tuple[List[str], Direction, List[str]]:
    """tokens = before + relation words + after"""
    for i, token in enumerate(tokens):
        if token in DIRECTION_WORDS:
            direction = Direction(token)
            words = RELATION_WORDS[direction]
            if tokens[i: i + len(words)] != words:
                raise TranslationError(f"Malformed relation near {token!r}", question)
            return tokens[:i], direction, tokens[i + len(words):]
    raise TranslationError("No spatial relation found", question)


def _expect(tokens: List[str], prefix: List[str], question: List[str]) -> List[str]:
    if tokens[: len(prefix)] != prefix:
        raise TranslationError(f"Expected {' '.join(prefix)!r}", question)
    return tokens[len(prefix):]


def translate_question(tokens: Sequence[str]) -> ProgramNode:
    """Program of a template question; the inverse of gen_question's phrasing"""
    question = list(tokens)
    if question[:1] == ["what"] and len(question) > 4:
        attribute = question[1]
        if attribute not in ATTRIBUTE_TYPES:
            raise TranslationError(f"Cannot ask for {attribute!r}", question)
        rest = _expect(question[2:], ["is", "the"], question)
        if any(token in DIRECTION_WORDS for token in rest):
            before, direction, after = _split_relation(rest, question)
            if before != ["object"]:
                raise TranslationError("Relation questions ask about 'the object'", question)
            referent = parse_noun_phrase(_expect(after, ["the"], question), False, question)
            return P.query(attribute, P.relate(direction.value, P.select(**referent)))
        return P.query(attribute, P.select(**parse_noun_phrase(rest, False, question)))

    if question[:3] == ["is", "there", "a"]:
        return P.exist(P.select(**parse_noun_phrase(question[3:], False, question)))

    if question[:2] == ["is", "the"]:
        before, direction, after = _split_relation(question[2:], question)
        subject = parse_noun_phrase(before, False, question)
        referent = parse_noun_phrase(_expect(after, ["the"], question), False, question)
        return P.exist(P.filter_chain(subject, P.relate(direction.value, P.select(**referent))))

    if question[:2] == ["do", "the"] and question[-4:-1] == ["have", "the", "same"]:
        attribute = question[-1]
        if attribute not in ATTRIBUTE_TYPES:
            raise TranslationError(f"Cannot compare {attribute!r}", question)
        body = question[2:-4]
        if "and" not in body:
            raise TranslationError("Comparison needs two objects", question)
        split = body.index("and")
        a = parse_noun_phrase(body[:split], False, question)
        b = parse_noun_phrase(_expect(body[split + 1:], ["the"], question), False, question)
        return P.compare_attr(attribute, P.select(**a), P.select(**b))

    if question[:2] == ["how", "many"] and question[-2:] == ["are", "there"]:
        return P.count(P.select(**parse_noun_phrase(question[2:-2], True, question)))

    raise TranslationError("Question matches no template", question)
