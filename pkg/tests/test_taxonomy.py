import numpy as np
import pytest

from oracles import brute_ancestors, brute_depths, brute_lch, random_dag
from visquest import (InvalidTaxonomyError, NotFoundError,
                      SoftmaxDistribution, Taxonomy, load_taxonomy,
                      save_taxonomy, select_target_word)

TOY_EDGES = [("dog", "animal"), ("cat", "animal"), ("animal", "entity"),
             ("car", "artifact"), ("artifact", "entity")]


@pytest.fixture
def toy():
    return Taxonomy(edges=TOY_EDGES)


# ---------------------------------------------------------------- construction

def test_toy_taxonomy_has_six_nodes(toy):
    assert len(toy) == 6
    assert toy.root == "entity"
    assert set(toy.words) == {"dog", "cat", "animal", "car", "artifact", "entity"}


def test_cycle_is_rejected_and_names_a_member():
    with pytest.raises(InvalidTaxonomyError) as err:
        Taxonomy(edges=[("dog", "animal"), ("animal", "dog"), ("dog", "entity")])
    assert "dog" in str(err.value) or "animal" in str(err.value)


def test_self_loop_rejected():
    with pytest.raises(InvalidTaxonomyError):
        Taxonomy(edges=[("dog", "dog")])


def test_empty_edge_list_with_declared_root():
    t = Taxonomy(edges=[], root="entity")
    assert len(t) == 1
    assert t.root == "entity"
    assert t.ancestor_set("entity") == {"entity"}


def test_two_parentless_nodes_rejected():
    with pytest.raises(InvalidTaxonomyError):
        Taxonomy(edges=[("a", "root1"), ("b", "root2")])


def test_no_words_at_all_rejected():
    with pytest.raises(InvalidTaxonomyError):
        Taxonomy(edges=[])


# ------------------------------------------------------------------- ancestors

def test_ancestor_set_includes_self(toy):
    assert toy.ancestor_set("dog") == {"dog", "animal", "entity"}


def test_root_ancestors_is_just_the_root(toy):
    assert toy.ancestor_set("entity") == {"entity"}


def test_multi_parent_word_unions_both_chains():
    edges = TOY_EDGES + [("sphinx", "animal"), ("sphinx", "artifact")]
    t = Taxonomy(edges=edges)
    assert t.ancestor_set("sphinx") == {"sphinx", "animal", "artifact", "entity"}


def test_ancestor_set_unknown_word(toy):
    with pytest.raises(NotFoundError):
        toy.ancestor_set("unicorn")


# ------------------------------------------------------------------------- LCH

def test_lch_of_dog_and_cat_is_animal(toy):
    assert toy.lowest_common_hypernym(["dog", "cat"]).word == "animal"


def test_lch_across_branches_is_the_root(toy):
    assert toy.lowest_common_hypernym(["dog", "car"]).word == "entity"


def test_lch_of_a_word_with_itself(toy):
    result = toy.lowest_common_hypernym(["dog", "dog"])
    assert result.word == "dog"
    assert result.depth == 2


def test_lch_of_word_and_its_ancestor_is_the_ancestor(toy):
    assert toy.lowest_common_hypernym(["dog", "animal"]).word == "animal"


def test_lch_result_is_ancestor_of_every_input(toy):
    rng = np.random.default_rng(0)
    words = toy.words
    for _ in range(50):
        picks = [words[int(i)] for i in rng.integers(0, len(words), size=3)]
        lch = toy.lowest_common_hypernym(picks).word
        for w in picks:
            assert lch in toy.ancestor_set(w)


def test_lch_depth_ties_break_lexicographically():
    # x has two depth-1 parents; the LCH of {x, x} is x itself, but the
    # LCH of two words whose only common ancestors sit at equal depth must
    # pick the alphabetically first.
    edges = [("alpha", "root"), ("beta", "root"),
             ("left", "alpha"), ("left", "beta"),
             ("right", "alpha"), ("right", "beta")]
    t = Taxonomy(edges=edges)
    assert t.lowest_common_hypernym(["left", "right"]).word == "alpha"


def test_lch_matches_brute_force_on_random_dags():
    rng = np.random.default_rng(1)
    for _ in range(100):
        edges, names, root = random_dag(rng, max_nodes=50)
        t = Taxonomy(edges=edges) if edges else Taxonomy(edges=[], root=root)
        count = int(rng.integers(1, 4))
        words = [names[int(i)] for i in rng.integers(0, len(names), size=count)]
        got = t.lowest_common_hypernym(words)
        assert got.word == brute_lch(edges, root, words)
        depths = brute_depths(edges, root)
        assert got.depth == depths[got.word]


def test_monotone_abstraction_on_nested_sets():
    rng = np.random.default_rng(2)
    for _ in range(100):
        edges, names, root = random_dag(rng, max_nodes=30)
        t = Taxonomy(edges=edges) if edges else Taxonomy(edges=[], root=root)
        base = [names[int(i)] for i in rng.integers(0, len(names), size=2)]
        extra = base + [names[int(rng.integers(0, len(names)))]]
        assert (t.lowest_common_hypernym(extra).depth
                <= t.lowest_common_hypernym(base).depth)


# ----------------------------------------------------------------- target word

def peaked(labels, weights):
    p = np.asarray(weights, dtype=np.float64)
    return SoftmaxDistribution(labels=tuple(labels), p=p / p.sum())


def test_top2_of_dog_cat_selects_animal(toy):
    d = peaked(("dog", "cat", "car"), [0.5, 0.4, 0.1])
    result = select_target_word(d, 2, toy)
    assert result.word == "animal"
    assert result.source_labels == ("dog", "cat")
    assert result.k == 2


def test_k3_is_more_abstract_than_k2(toy):
    d = peaked(("dog", "cat", "car"), [0.5, 0.3, 0.2])
    at2 = select_target_word(d, 2, toy)
    at3 = select_target_word(d, 3, toy)
    assert at2.word == "animal"
    assert at3.word == "entity"
    assert at3.depth <= at2.depth


def test_k1_returns_the_top_label(toy):
    d = peaked(("dog", "cat", "car"), [0.6, 0.3, 0.1])
    assert select_target_word(d, 1, toy).word == "dog"


def test_probability_ties_keep_label_order(toy):
    d = peaked(("cat", "dog", "car"), [0.4, 0.4, 0.2])
    result = select_target_word(d, 2, toy)
    assert result.source_labels == ("cat", "dog")
    # Same tie the other way round must flip the chosen pair.
    d2 = peaked(("dog", "cat", "car"), [0.4, 0.4, 0.2])
    assert select_target_word(d2, 2, toy).source_labels == ("dog", "cat")


def test_missing_label_is_reported(toy):
    d = peaked(("dog", "unicorn"), [0.6, 0.4])
    with pytest.raises(NotFoundError, match="unicorn"):
        select_target_word(d, 2, toy)


# ----------------------------------------------------------------- persistence

def test_tsv_round_trip(tmp_path, toy):
    path = tmp_path / "taxonomy.tsv"
    save_taxonomy(toy, path)
    loaded = load_taxonomy(path)
    assert loaded.edges() == toy.edges()
    assert loaded.root == toy.root


def test_tsv_comments_and_blank_lines(tmp_path):
    path = tmp_path / "taxonomy.tsv"
    path.write_text("# hypernym edges\n"
                    "dog\tanimal\n"
                    "\n"
                    "animal\tentity\n")
    t = load_taxonomy(path)
    assert t.root == "entity"
    assert t.depth("dog") == 2


def test_tsv_malformed_line_rejected(tmp_path):
    path = tmp_path / "taxonomy.tsv"
    path.write_text("dog animal no tabs here\n")
    with pytest.raises(InvalidTaxonomyError):
        load_taxonomy(path)
