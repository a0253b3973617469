import numpy as np
import pytest

from magnet.actor import (
    AggregateMLPActor,
    MessagePassingActor,
    TypedNetBank,
    VertexSet,
    actor_forward,
    aggregate_messages,
    build_edges,
    choose_actions,
    collect_observations,
    init_info,
    message_round,
    mlp_aggregate_fallback,
)
from magnet.autodiff import Tensor, check_parameter_gradients, parameter
from magnet.envs import MoveAction, PredatorPreyConfig, PredatorPreyEnv
from magnet.errors import ContractError
from magnet.graph import RelevanceGraph, TypeAssignment, assign_types
from magnet.rng import RngStream

H = 8


def toy_types(n_agents=2, n_objects=1, agent_type=0, object_type=3):
    """Minimal hand-built type assignment: agents of one type plus objects."""
    cols = n_agents + n_objects
    vt = np.array([agent_type] * n_agents + [object_type] * n_objects)
    present = np.ones(cols, dtype=bool)
    edge = np.zeros((n_agents, cols), dtype=np.int64)
    for i in range(n_agents):
        for j in range(cols):
            edge[i, j] = 0 if j < n_agents else 2
    return TypeAssignment(n_agents, vt, present, edge, {agent_type: "a", object_type: "o"}, (0, 1, 2))


def toy_vset(types: TypeAssignment, obs_dim=6, pooled_dim=3, seed=0):
    gen = np.random.default_rng(seed)
    v = types.n_cols
    return VertexSet(
        cols=np.arange(v),
        col_to_local={i: i for i in range(v)},
        vtypes=types.vertex_types.copy(),
        obs=gen.normal(size=(v, obs_dim)),
        pooled=gen.normal(size=(v, pooled_dim)),
        n_agents=types.n_agents,
    )


def toy_bank(obs_dim=6, pooled_dim=3, seed=0, action_dim=2):
    return TypedNetBank(
        vertex_type_ids=(0, 1, 2, 3),
        edge_type_ids=(0, 1, 2),
        obs_dim=obs_dim,
        pooled_dim=pooled_dim,
        hidden_width=H,
        action_dim=action_dim,
        rng=RngStream(seed, "bank"),
        init_hidden=(10,),
        msg_hidden=(),
        choice_hidden=(10,),
    )


def graph_of(values, types) -> RelevanceGraph:
    return RelevanceGraph(Tensor(np.asarray(values, dtype=float)), types)


def identity_msg_net(bank, etype):
    net = bank.msg_nets[etype]
    assert len(net.layers) == 1
    net.layers[0].W.data[...] = np.eye(H)
    net.layers[0].b.data[...] = 0.0


# -- init -----------------------------------------------------------------------


def test_init_same_type_same_obs_same_mu():
    types = toy_types(n_agents=3, n_objects=0)
    vset = toy_vset(types)
    vset.obs[1] = vset.obs[0]
    mu = init_info(toy_bank(), vset)
    assert np.array_equal(mu.data[0], mu.data[1])
    assert not np.array_equal(mu.data[0], mu.data[2])


def test_init_zero_net_gives_zero_mu():
    types = toy_types()
    bank = toy_bank()
    for t in bank.init_nets:
        for p in bank.init_nets[t].parameters():
            p.data[...] = 0.0
    mu = init_info(bank, toy_vset(types))
    assert np.array_equal(mu.data, np.zeros_like(mu.data))


def test_init_output_width_uniform_across_types():
    types = toy_types(n_agents=2, n_objects=2)
    mu = init_info(toy_bank(), toy_vset(types))
    assert mu.data.shape == (4, H)


# -- message rounds ---------------------------------------------------------------


def test_zero_weights_zero_messages():
    types = toy_types()
    vset = toy_vset(types)
    bank = toy_bank()
    g = graph_of(np.zeros((2, 3)), types)
    edges = build_edges(g, vset)
    mu = init_info(bank, vset)
    inbox = aggregate_messages(bank, g, edges, mu)
    assert np.array_equal(inbox.data, np.zeros_like(inbox.data))


def test_single_edge_identity_net_scales_mu():
    # one agent row, weight 2.0 to the object; message to object = 2 * mu_agent
    types = toy_types(n_agents=2, n_objects=1)
    vset = toy_vset(types)
    bank = toy_bank()
    identity_msg_net(bank, 2)
    w = np.zeros((2, 3))
    w[0, 2] = 2.0
    g = graph_of(w, types)
    edges = build_edges(g, vset)
    mu = init_info(bank, vset)
    inbox = aggregate_messages(bank, g, edges, mu)
    assert np.allclose(inbox.data[2], 2.0 * mu.data[0])
    # the object echoes back along the same entry
    obj_msg = bank.msg_nets[2](Tensor(mu.data[2:3])).data[0]
    assert np.allclose(inbox.data[0], 2.0 * obj_msg)
    assert np.array_equal(inbox.data[1], np.zeros(H))


def test_doubling_weight_doubles_only_that_message():
    types = toy_types(n_agents=2, n_objects=1)
    vset = toy_vset(types)
    bank = toy_bank()
    w = np.zeros((2, 3))
    w[0, 2] = 0.7  # agent0 <-> object
    w[1, 0] = 0.3  # agent1 -> agent0
    g1 = graph_of(w, types)
    w2 = w.copy()
    w2[0, 2] = 1.4
    g2 = graph_of(w2, types)
    mu = init_info(bank, vset)
    edges = build_edges(g1, vset)
    in1 = aggregate_messages(bank, g1, edges, mu).data
    in2 = aggregate_messages(bank, g2, build_edges(g2, vset), mu).data
    assert np.allclose(in2[2], 2.0 * in1[2])  # doubled edge
    assert np.array_equal(in2[1], in1[1])  # untouched vertex rows identical
    # agent0 receives from the object edge too: doubled there, agent1 contribution unchanged
    a1_contrib = in1[0] - 0.0  # decompose via zeroing
    w3 = w.copy()
    w3[0, 2] = 0.0
    only_a1 = aggregate_messages(bank, graph_of(w3, types), build_edges(graph_of(w3, types), vset), mu).data[0]
    assert np.allclose(in2[0] - only_a1, 2.0 * (in1[0] - only_a1))


def test_message_round_changes_mu_and_keeps_shape():
    types = toy_types()
    vset = toy_vset(types)
    bank = toy_bank()
    g = graph_of(np.full((2, 3), 0.5), types)
    edges = build_edges(g, vset)
    mu = init_info(bank, vset)
    cell = Tensor(np.zeros_like(mu.data))
    mu2, cell2 = message_round(bank, g, edges, mu, cell, vset)
    assert mu2.data.shape == mu.data.shape
    assert not np.array_equal(mu2.data, mu.data)


# -- action heads -------------------------------------------------------------------


def test_choose_actions_deterministic_at_zero_sigma():
    types = toy_types()
    vset = toy_vset(types)
    bank = toy_bank()
    mu = init_info(bank, vset)
    a1, m1 = choose_actions(bank, mu, vset, [0, 1], "predator-prey", sigma=0.0)
    mu_b = init_info(bank, vset)
    a2, m2 = choose_actions(bank, mu_b, vset, [0, 1], "predator-prey", sigma=0.0)
    assert a1 == a2
    assert np.array_equal(m1.data, m2.data)


def test_pp_head_ranges():
    types = toy_types()
    vset = toy_vset(types, seed=3)
    bank = toy_bank(seed=7)
    for p in bank.choice_net.parameters():
        p.data *= 5.0  # exaggerate to probe the squash
    mu = init_info(bank, vset)
    actions, _ = choose_actions(bank, mu, vset, [0, 1], "predator-prey")
    for a in actions.values():
        assert isinstance(a, MoveAction)
        assert 0.0 <= a.direction < 2 * np.pi
        assert 0.0 <= a.speed <= 1.0


def test_bomber_head_argmax_one_hot():
    types = toy_types()
    vset = toy_vset(types)
    bank = toy_bank(action_dim=6)
    mu = init_info(bank, vset)
    actions, logits = choose_actions(bank, mu, vset, [0, 1], "bomber")
    assert logits.data.shape == (2, 6)
    for i, a in enumerate(actions.values()):
        assert a == int(np.argmax(logits.data[i]))
        from magnet.envs import encode_discrete

        onehot = encode_discrete(a)
        assert onehot.shape == (6,) and onehot.sum() == 1.0


def test_choose_actions_rejects_non_agent_vertex():
    types = toy_types()
    vset = toy_vset(types)
    bank = toy_bank()
    mu = init_info(bank, vset)
    with pytest.raises(ContractError):
        choose_actions(bank, mu, vset, [2], "predator-prey")  # column 2 is the object


# -- full pipeline --------------------------------------------------------------------


def test_zero_rounds_ignores_messages():
    types = toy_types()
    vset = toy_vset(types)
    bank = toy_bank()
    actor0 = MessagePassingActor(bank, rounds=0)
    g_zero = graph_of(np.zeros((2, 3)), types)
    g_full = graph_of(np.ones((2, 3)) * 0.9, types)
    a0, m0, _ = actor0.forward(g_zero, vset, [0, 1])
    a1, m1, _ = actor0.forward(g_full, vset, [0, 1])
    assert np.array_equal(m0.data, m1.data)  # graph cannot matter with no rounds


def test_zero_weight_isolation_bit_exact():
    types = toy_types(n_agents=3, n_objects=2)
    bank = toy_bank()
    actor = MessagePassingActor(bank, rounds=3)
    w = np.random.default_rng(0).normal(size=(3, 5)) * 0.5
    w[0, :] = 0.0  # agent 0: outgoing row zero
    w[:, 0] = 0.0  # incoming column zero
    g = graph_of(w, types)
    vset = toy_vset(types, seed=1)
    _, mean_a, _ = actor.forward(g, vset, [0])
    for trial in range(5):
        vset_b = toy_vset(types, seed=1)
        perturb = np.random.default_rng(trial).normal(size=vset_b.obs.shape)
        perturb[0] = 0.0  # keep agent 0's own observation fixed
        vset_b.obs = vset_b.obs + perturb
        _, mean_b, _ = actor.forward(g, vset_b, [0])
        assert np.array_equal(mean_a.data, mean_b.data)


def test_permutation_equivariance_same_type_agents():
    types = toy_types(n_agents=2, n_objects=1)
    bank = toy_bank()
    actor = MessagePassingActor(bank, rounds=2)
    vset = toy_vset(types, seed=5)
    w = np.array([[0.0, 0.4, -0.2], [0.6, 0.0, 0.8]])
    g = graph_of(w, types)
    _, mean, _ = actor.forward(g, vset, [0, 1])

    # swap agents 0 and 1 everywhere (rows, agent columns, observations)
    vset2 = toy_vset(types, seed=5)
    vset2.obs[[0, 1]] = vset2.obs[[1, 0]]
    vset2.pooled[[0, 1]] = vset2.pooled[[1, 0]]
    w2 = w[[1, 0]][:, [1, 0, 2]]
    g2 = graph_of(w2, types)
    _, mean2, _ = actor.forward(g2, vset2, [0, 1])
    assert np.allclose(mean2.data, mean.data[[1, 0]], atol=1e-12)


def test_actor_gradcheck_three_vertex_toy():
    types = toy_types(n_agents=2, n_objects=1)
    vset = toy_vset(types)
    bank = toy_bank()
    actor = MessagePassingActor(bank, rounds=2)
    w = parameter(np.array([[0.0, 0.5, -0.3], [0.2, 0.0, 0.7]]), name="graph")

    def loss_fn():
        g = RelevanceGraph(w * 1.0, types)
        _, mean, _ = actor.forward(g, vset, [0, 1])
        return (mean * mean).sum()

    params = actor.parameters() + [w]
    err = check_parameter_gradients(loss_fn, params, max_coords_per_param=6, rng=RngStream(0, "gc"))
    assert err < 1e-4


def test_actor_forward_with_real_env():
    env = PredatorPreyEnv(PredatorPreyConfig(grid=8, predators_team1=2, n_prey=1, wall_count=3, max_objects=5))
    state, _ = env.reset(4)
    ta = assign_types(env, state)
    vset = collect_observations(env, state, ta)
    bank = TypedNetBank(
        vertex_type_ids=(0, 1, 2, 3),
        edge_type_ids=(0, 1, 2),
        obs_dim=env.local_obs_dim(),
        pooled_dim=env.cfg.channels + 1,
        hidden_width=H,
        action_dim=2,
        rng=RngStream(1, "bank"),
    )
    actor = MessagePassingActor(bank, rounds=5)
    g = RelevanceGraph(Tensor(np.full((ta.n_agents, ta.n_cols), 0.3) ), ta)
    actions, mean, mu = actor_forward(actor, g, vset, env.learning_agents())
    assert set(actions) == set(env.learning_agents())
    assert mu.data.shape == (len(vset.cols), H)


# -- fallback ---------------------------------------------------------------------------


def test_fallback_never_calls_message_round(monkeypatch):
    import magnet.actor.message_passing as mp

    calls = {"n": 0}
    orig = mp.message_round

    def probe(*a, **kw):
        calls["n"] += 1
        return orig(*a, **kw)

    monkeypatch.setattr(mp, "message_round", probe)
    types = toy_types()
    vset = toy_vset(types)
    agg = AggregateMLPActor(2, 3, pooled_dim=3, action_dim=2, rng=RngStream(2, "agg"))
    mlp_aggregate_fallback(agg, graph_of(np.ones((2, 3)) * 0.2, types), vset, [0, 1])
    assert calls["n"] == 0


def test_fallback_action_shape_parity():
    types = toy_types()
    vset = toy_vset(types)
    bank = toy_bank()
    actor = MessagePassingActor(bank, rounds=2)
    agg = AggregateMLPActor(2, 3, pooled_dim=3, action_dim=2, rng=RngStream(2, "agg"))
    g = graph_of(np.ones((2, 3)) * 0.2, types)
    a_mp, mean_mp, _ = actor.forward(g, vset, [0, 1])
    a_ag, mean_ag, _ = agg.forward(g, vset, [0, 1])
    assert set(a_mp) == set(a_ag)
    assert mean_mp.data.shape == mean_ag.data.shape
    assert all(isinstance(a, MoveAction) for a in a_ag.values())
