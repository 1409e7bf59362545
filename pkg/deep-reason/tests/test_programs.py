"""
Tests for programs, question templates and translation
"""
import pytest
import numpy as np
import sys
import os

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import AmbiguityError, ContractError, ProgramParseError, TranslationError, UninstantiableTemplate
from schemas.program import Direction, TemplateId
from schemas.world import SceneGraph, SceneObject, WorldConfig
from utils import programs as P
from utils.programs import execute_program, on_side, parse_program, program_text, serialize_program, template_of
from utils.questions import gen_question, translate_question
from utils.seeding import derive_rng
from utils.vocab import ANSWER_FINGERPRINT, ANSWER_VOCAB, PROGRAM_INDEX, QUESTION_INDEX, vocab_fingerprint
from utils.world import gen_scene


def _obj(i, shape, color, size, material, bbox):
    return SceneObject(id=i, shape=shape, color=color, size_class=size, material=material, bbox=bbox)


@pytest.fixture
def scene():
    # centres: (30, 30), (120, 80), (72, 162), (180, 170)
    return SceneGraph(image_id="img-test", width=224, height=224, objects=[
        _obj(0, "cube", "red", "small", "matte", (20, 20, 20, 20)),
        _obj(1, "sphere", "blue", "large", "shiny", (100, 60, 40, 40)),
        _obj(2, "cylinder", "green", "small", "matte", (60, 150, 24, 24)),
        _obj(3, "cube", "blue", "small", "shiny", (170, 160, 20, 20)),
    ])


@pytest.fixture(scope="module")
def generated():
    """Questions of every template over a batch of random scenes"""
    cfg = WorldConfig()
    items = []
    for k in range(40):
        scene = gen_scene(derive_rng(11, "scene", k), cfg, f"img{k:05d}")
        for template in TemplateId:
            rng = derive_rng(11, "question", k, template.value)
            for q in range(3):
                try:
                    items.append((scene, gen_question(scene, template, rng, f"{scene.image_id}-{template.value}-{q}")))
                except UninstantiableTemplate:
                    pass
    return items


class TestVocabulary:
    """Answer vocabulary"""

    def test_answer_order(self):
        """Test the fixed answer order and size"""
        assert len(ANSWER_VOCAB) == 24
        assert ANSWER_VOCAB[:7] == ["yes", "no", "red", "green", "blue", "yellow", "gray"]
        assert ANSWER_VOCAB[7:15] == ["cube", "sphere", "pyramid", "cylinder", "small", "large", "matte", "shiny"]
        assert ANSWER_VOCAB[15:] == [str(n) for n in range(9)]

    def test_fingerprint(self):
        """Test the fingerprint is 16 hex digits and order sensitive"""
        assert len(ANSWER_FINGERPRINT) == 16
        int(ANSWER_FINGERPRINT, 16)
        assert vocab_fingerprint(list(reversed(ANSWER_VOCAB))) != ANSWER_FINGERPRINT


class TestExecution:
    """Set semantics on a fixed scene"""

    def test_query(self, scene):
        """Test query returns the attribute of a singleton"""
        assert execute_program(P.query("color", P.select(shape="sphere")), scene) == "blue"

    def test_query_ambiguous(self, scene):
        """Test query over two objects raises AmbiguityError"""
        with pytest.raises(AmbiguityError):
            execute_program(P.query("color", P.select(shape="cube")), scene)

    def test_exist(self, scene):
        """Test exist answers yes and no"""
        assert execute_program(P.exist(P.select(color="red")), scene) == "yes"
        assert execute_program(P.exist(P.select(color="yellow")), scene) == "no"

    def test_count(self, scene):
        """Test count returns a digit"""
        assert execute_program(P.count(P.select(size="small")), scene) == "3"
        assert execute_program(P.count(P.select()), scene) == "4"

    def test_relate_excludes_referent(self, scene):
        """Test relate returns the other objects strictly on one side"""
        assert execute_program(P.count(P.relate("right", P.select(color="red"))), scene) == "3"
        assert execute_program(P.count(P.relate("above", P.select(shape="cylinder"))), scene) == "2"
        assert execute_program(P.count(P.relate("left", P.select(color="red"))), scene) == "0"

    def test_relate_query(self, scene):
        """Test a query through a relation; y grows downward"""
        program = P.query("color", P.relate("above", P.select(shape="sphere")))
        assert execute_program(program, scene) == "red"

    def test_relate_needs_singleton_referent(self, scene):
        """Test relate on an ambiguous referent raises AmbiguityError"""
        with pytest.raises(AmbiguityError):
            execute_program(P.exist(P.relate("left", P.select(shape="cube"))), scene)

    def test_spatial_exist(self, scene):
        """Test filtering the related set by the subject description"""
        left = P.exist(P.filter_chain({"shape": "sphere"}, P.relate("left", P.select(color="green"))))
        right = P.exist(P.filter_chain({"shape": "sphere"}, P.relate("right", P.select(color="green"))))
        assert execute_program(left, scene) == "no"
        assert execute_program(right, scene) == "yes"

    def test_compare(self, scene):
        """Test compare_attr on two singletons"""
        same = P.compare_attr("size", P.select(color="red"), P.select(shape="cylinder"))
        different = P.compare_attr("material", P.select(color="red"), P.select(shape="sphere"))
        assert execute_program(same, scene) == "yes"
        assert execute_program(different, scene) == "no"

    def test_relations_irreflexive_and_antisymmetric(self, scene):
        """Test no object is on a side of itself and no pair is on the same side of each other"""
        for a in scene.objects:
            for d in Direction:
                assert not on_side(a, a, d)
            for b in scene.objects:
                if a.id != b.id:
                    for d in Direction:
                        assert not (on_side(a, b, d) and on_side(b, a, d))


class TestCodec:
    """S-expression serialisation and parsing"""

    def test_canonical_text(self):
        """Test the canonical form orders select constraints alphabetically"""
        program = P.query("color", P.select(shape="cube", size="small"))
        assert program_text(program) == "( query color ( select shape= cube size= small ) )"

    def test_parse_accepts_any_constraint_order(self):
        """Test select constraints may come in any order"""
        a = parse_program("( exist ( select shape= cube color= red ) )")
        b = parse_program("( exist ( select color= red shape= cube ) )")
        assert a == b

    def test_parse_inverts_serialize(self, generated):
        """Test parse(serialize(p)) == p for generated programs"""
        for _, item in generated:
            assert parse_program(serialize_program(item.program)) == item.program

    @pytest.mark.parametrize("text,position", [
        ("( query color ( select shape= cube )", 8),
        ("( frobnicate ( select ) )", 1),
        ("( relate sideways ( select ) )", 2),
        ("( exist ( select ) ) )", 6),
        ("( select shape= cube )", 0),
    ])
    def test_parse_errors(self, text, position):
        """Test malformed programs raise ProgramParseError at the offending token"""
        with pytest.raises(ProgramParseError) as exc:
            parse_program(text)
        assert exc.value.position == position

    def test_arity_violation(self):
        """Test exist with two children raises ProgramParseError"""
        with pytest.raises(ProgramParseError):
            parse_program("( exist ( select ) ( select ) )")

    def test_validate_rejects_nested_root(self):
        """Test a root operation below the root is invalid"""
        bad = P.exist(P.count(P.select()))
        with pytest.raises(ContractError):
            P.validate_program(bad)


class TestTemplates:
    """Generation, oracle closure and translation"""

    def test_every_template_instantiated(self, generated):
        """Test each template produces questions"""
        assert {item.template for _, item in generated} == set(TemplateId)

    def test_oracle_closure(self, generated):
        """Test executing the translated question reproduces the stored answer"""
        for scene, item in generated:
            assert execute_program(translate_question(item.question), scene) == item.answer

    def test_translation_is_exact(self, generated):
        """Test translation returns the program the generator attached"""
        for _, item in generated:
            assert translate_question(item.question) == item.program
            assert template_of(item.program) == item.template

    def test_tokens_in_vocabulary(self, generated):
        """Test question and program tokens are in the closed vocabularies"""
        for _, item in generated:
            assert all(token in QUESTION_INDEX for token in item.question)
            assert all(token in PROGRAM_INDEX for token in serialize_program(item.program))

    @pytest.mark.parametrize("template", [TemplateId.EXIST, TemplateId.SPATIAL_EXIST, TemplateId.COMPARE])
    def test_yes_and_no_both_occur(self, generated, template):
        """Test yes/no templates produce both answers"""
        answers = {item.answer for _, item in generated if item.template == template}
        assert answers == {"yes", "no"}

    def test_examples_translate(self):
        """Test the phrasing of each template"""
        assert translate_question("what color is the cube".split()) == P.query("color", P.select(shape="cube"))
        assert translate_question("is there a red sphere".split()) == P.exist(P.select(color="red", shape="sphere"))
        assert translate_question("is the cube left of the sphere".split()) == P.exist(
            P.filter_chain({"shape": "cube"}, P.relate("left", P.select(shape="sphere"))))
        assert translate_question("what color is the object left of the red cube".split()) == P.query(
            "color", P.relate("left", P.select(color="red", shape="cube")))
        assert translate_question("do the cube and the sphere have the same color".split()) == P.compare_attr(
            "color", P.select(shape="cube"), P.select(shape="sphere"))
        assert translate_question("how many red objects are there".split()) == P.count(P.select(color="red"))

    @pytest.mark.parametrize("text", [
        "what is this",
        "is there a purple cube",
        "is the cube beside the sphere",
        "how many cubes",
        "do the cube and the sphere have the same mood",
    ])
    def test_untranslatable(self, text):
        """Test questions outside the grammar raise TranslationError carrying the tokens"""
        with pytest.raises(TranslationError) as exc:
            translate_question(text.split())
        assert exc.value.tokens == text.split()

    def test_generation_deterministic(self, scene):
        """Test the same generator state yields the same question"""
        a = gen_question(scene, TemplateId.RELATE_QUERY, np.random.default_rng(4), "q")
        b = gen_question(scene, TemplateId.RELATE_QUERY, np.random.default_rng(4), "q")
        assert a == b
