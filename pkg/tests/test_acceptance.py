"""End-to-end acceptance checks.

Each test covers one promised property and prints a single PASS line with its
measured numbers; the assertions enforce the pinned bounds.
"""

import json
import time

import numpy as np

from ficg.cli import main as cli_main
from ficg.data import (FeatureDims, SynthConfig, UtteranceRecord,
                       count_speakers, dataset_dims, generate_synthetic,
                       iter_training_samples)
from ficg.encoder import (encode, init_projection, init_sage, project_inputs,
                          zero_sage_like)
from ficg.gradcheck import make_instance
from ficg.graphs import NodeKind, build_pig, build_sig
from ficg.metrics import evaluate
from ficg.model import (AblationMode, backward, forward, params_to_vector,
                        vector_to_params)
from ficg.training import (ABLATION_ORDER, TrainConfig, run_ablation_suite,
                           split_dialogues, train)

BENCH = dict(n_dialogues=1000, turns_per_dialogue=6, words_per_utterance=8,
             chain_coefficient=0.5, noise_stddev=0.05)
BENCH_TRAIN = dict(d_model=16, d_hidden=64, learning_rate=2e-3, epochs=80,
                   batch_size=128)


def random_history(rng, j, max_words, dims):
    utts = []
    for t in range(j):
        q = int(rng.integers(1, max_words + 1))
        utts.append(UtteranceRecord(
            speaker_id=t % 2, words=tuple(f"w{k}" for k in range(q)),
            word_text_feats=rng.normal(size=(q, dims.word_text)),
            word_speech_feats=rng.normal(size=(q, dims.word_speech)),
            utt_text_feat=rng.normal(size=dims.utt_text),
            utt_speech_feat=rng.normal(size=dims.utt_speech),
            pitch_target=float(rng.normal()), energy_target=float(rng.normal())))
    return tuple(utts)


def test_topology_matches_closed_form_counts():
    rng = np.random.default_rng(0)
    dims = FeatureDims(3, 3, 3, 3)
    t0 = time.perf_counter()
    for _ in range(200):
        j = int(rng.integers(1, 9))
        history = random_history(rng, j, 6, dims)
        total_words = sum(u.n_words for u in history)
        sig = build_sig(history)
        pig = build_pig(history)
        for graph in (sig, pig):
            assert len(graph.nodes) == j + 1 + 2 * total_words
            assert len(graph.edges) == j + 2 * total_words
            with_out = {e.src for e in graph.edges}
            sinks = [n.node_id for n in graph.nodes if n.node_id not in with_out]
            assert sinks == [graph.interaction_id]
            assert next(n.kind for n in graph.nodes
                        if n.node_id == graph.interaction_id) is NodeKind.INTERACTION
        assert [(n.node_id, n.kind) for n in sig.nodes] == \
               [(n.node_id, n.kind) for n in pig.nodes]
        assert [(e.src, e.dst, e.kind) for e in sig.edges] == \
               [(e.src, e.dst, e.kind) for e in pig.edges]
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    print(f"\nPASS topology: 200 random histories match closed-form counts, "
          f"SIG/PIG isomorphic, unique interaction sink ({elapsed:.2f}s < 5s)")


def test_gradients_match_central_differences():
    rng = np.random.default_rng(2024)
    eps = 1e-6
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(20):
        sample, params = make_instance(rng, d_model=8, d_hidden=8)
        _, cache = forward(sample, params, AblationMode.FULL)
        analytic = params_to_vector(backward(sample, params, AblationMode.FULL,
                                             cache))
        base = params_to_vector(params)

        def loss_at(vec):
            pred, _ = forward(sample, vector_to_params(vec, params),
                              AblationMode.FULL)
            dp = pred[0] - sample.current.pitch_target
            de = pred[1] - sample.current.energy_target
            return 0.5 * (dp * dp + de * de)

        fd = np.zeros_like(base)
        for i in range(base.size):
            up = base.copy()
            up[i] += eps
            down = base.copy()
            down[i] -= eps
            fd[i] = (loss_at(up) - loss_at(down)) / (2.0 * eps)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-8)
        worst = max(worst, float(np.max(np.abs(analytic - fd) / denom)))
    elapsed = time.perf_counter() - t0
    assert worst < 1e-5
    assert elapsed < 60.0
    print(f"\nPASS gradients: 20 instances, max relative error {worst:.3e} "
          f"< 1e-5 ({elapsed:.1f}s < 60s)")


def test_word_order_permutation_invariance():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        dims = FeatureDims(*(int(rng.integers(3, 7)) for _ in range(4)))
        history = random_history(rng, int(rng.integers(1, 5)), 5, dims)
        proj = init_projection(dims, 8, 2, rng)
        proj.speaker_emb[...] = rng.normal(0.0, 0.3, proj.speaker_emb.shape)
        sage_s = init_sage(8, rng)
        sage_p = init_sage(8, rng)
        shuffled = []
        for utt in history:
            order = rng.permutation(utt.n_words)
            shuffled.append(UtteranceRecord(
                speaker_id=utt.speaker_id,
                words=tuple(utt.words[k] for k in order),
                word_text_feats=utt.word_text_feats[order],
                word_speech_feats=utt.word_speech_feats[order],
                utt_text_feat=utt.utt_text_feat,
                utt_speech_feat=utt.utt_speech_feat,
                pitch_target=utt.pitch_target,
                energy_target=utt.energy_target))
        shuffled = tuple(shuffled)
        for build, sage in ((build_sig, sage_s), (build_pig, sage_p)):
            base = encode(build(history), proj, sage).pooled
            moved = encode(build(shuffled), proj, sage).pooled
            rel = float(np.max(np.abs(moved - base))
                        / max(float(np.max(np.abs(base))), 1e-30))
            worst = max(worst, rel)
    assert worst < 1e-6
    print(f"\nPASS permutation: 50 instances, worst relative pooled change "
          f"{worst:.3e} < 1e-6")


def test_zero_aggregator_collapse():
    rng = np.random.default_rng(11)
    for j in (1, 2, 5, 8):
        dims = FeatureDims(4, 3, 5, 4)
        history = random_history(rng, j, 4, dims)
        proj = init_projection(dims, 6, 2, rng)
        proj.speaker_emb[...] = rng.normal(0.0, 0.3, proj.speaker_emb.shape)
        zero = zero_sage_like(init_sage(6, rng))
        for build in (build_sig, build_pig):
            graph = build(history)
            pooled = encode(graph, proj, zero).pooled
            f1 = project_inputs(graph, proj)[0]
            assert np.array_equal(pooled, f1 / (j + 1))
    print("\nPASS zero-collapse: all-zero aggregator pools to the first "
          "projected input divided by J+1, exactly, both graphs, J in {1,2,5,8}")


def test_ablation_orderings_on_synthetic_benchmark():
    t0 = time.perf_counter()
    sums = {m: 0.0 for m in ABLATION_ORDER}
    for seed in (0, 1, 2):
        synth = SynthConfig(keyword_coefficient=1.0, seed=seed, **BENCH)
        records = generate_synthetic(synth)
        tr, va, te = split_dialogues(records, seed=seed)
        config = TrainConfig(seed=seed, **BENCH_TRAIN)
        results = run_ablation_suite(tr, va, te, config)
        for m in ABLATION_ORDER:
            sums[m] += results[m].mae_pitch
    avg = {m: sums[m] / 3.0 for m in ABLATION_ORDER}
    full, no_sig, no_pig, no_both = (avg[m] for m in ABLATION_ORDER)
    elapsed = time.perf_counter() - t0
    assert full < no_sig
    assert full < no_pig
    assert no_both == max(avg.values())
    assert full <= 0.5 * no_both
    assert elapsed < 600.0
    print(f"\nPASS ablation: pitch MAE averaged over seeds 0-2: "
          f"Full={full:.4f} < NoSIG={no_sig:.4f}, < NoPIG={no_pig:.4f}, "
          f"NoBoth={no_both:.4f} is max, Full <= 0.5*NoBoth "
          f"({elapsed:.0f}s < 600s)")


def test_control_without_word_signal_shows_no_gap():
    full_maes, no_both_maes = [], []
    for seed in range(5):
        synth = SynthConfig(keyword_coefficient=0.0, seed=seed, **BENCH)
        records = generate_synthetic(synth)
        tr, va, te = split_dialogues(records, seed=seed)
        dims = dataset_dims(tr)
        n_spk = max(count_speakers(tr), count_speakers(va), count_speakers(te))
        tr_s = iter_training_samples(tr)
        va_s = iter_training_samples(va)
        te_s = iter_training_samples(te)
        for mode, sink in ((AblationMode.FULL, full_maes),
                           (AblationMode.NO_BOTH, no_both_maes)):
            config = TrainConfig(seed=seed, ablation=mode, **BENCH_TRAIN)
            result = train(tr_s, va_s, dims, n_spk, config)
            report = evaluate(result.params, mode, te_s,
                              config.encoder_settings())
            sink.append(report.mae_pitch)
    full = np.array(full_maes)
    no_both = np.array(no_both_maes)
    gap = abs(float(full.mean()) - float(no_both.mean()))
    pooled_std = float(np.sqrt((full.std(ddof=1) ** 2
                                + no_both.std(ddof=1) ** 2) / 2.0))
    assert gap <= 2.0 * pooled_std
    print(f"\nPASS control: without word-level signal the gap "
          f"|Full-NoBoth|={gap:.5f} stays within 2 pooled stds "
          f"({2.0 * pooled_std:.5f}) over seeds 0-4")


def test_cli_determinism_byte_identical(tmp_path, capsys):
    def run_all(root):
        root.mkdir()
        data = root / "data.jsonl"
        ckpt = root / "model.json"
        report = root / "report.json"
        ablation = root / "ablation.json"
        dot = root / "graph.dot"
        outs = []
        assert cli_main(["gen-data", "--out", str(data), "--n-dialogues", "6",
                         "--turns-per-dialogue", "3", "--words-per-utterance",
                         "2", "--dim-word-text", "4", "--dim-word-speech", "4",
                         "--dim-utt-text", "4", "--dim-utt-speech", "4",
                         "--seed", "0"]) == 0
        outs.append(capsys.readouterr().out)
        header = json.loads(data.read_text(encoding="utf-8").splitlines()[0])
        dialogue = json.loads(data.read_text(
            encoding="utf-8").splitlines()[1])["dialogue_id"]
        assert header["format"] == "ficg-dialogue"
        assert cli_main(["build-graph", "--data", str(data), "--dialogue",
                         dialogue]) == 0
        outs.append(capsys.readouterr().out)
        assert cli_main(["export-dot", "--data", str(data), "--dialogue",
                         dialogue, "--out", str(dot)]) == 0
        outs.append(capsys.readouterr().out)
        assert cli_main(["train", "--data", str(data), "--out", str(ckpt),
                         "--d-model", "6", "--d-hidden", "6", "--epochs", "2",
                         "--batch-size", "8", "--seed", "0"]) == 0
        outs.append(capsys.readouterr().out)
        assert cli_main(["eval", "--data", str(data), "--model", str(ckpt),
                         "--report", str(report)]) == 0
        outs.append(capsys.readouterr().out)
        assert cli_main(["ablate", "--data", str(data), "--out", str(ablation),
                         "--d-model", "4", "--d-hidden", "4", "--epochs", "1",
                         "--batch-size", "8", "--seed", "0"]) == 0
        outs.append(capsys.readouterr().out)
        assert cli_main(["grad-check", "--instances", "1", "--dims", "6",
                         "--seed", "0"]) == 0
        outs.append(capsys.readouterr().out)
        files = [data, dot, ckpt, root / "model.json.log.jsonl", report,
                 ablation]
        return outs, [f.read_bytes() for f in files]

    outs_a, files_a = run_all(tmp_path / "a")
    outs_b, files_b = run_all(tmp_path / "b")
    assert outs_a == outs_b
    assert files_a == files_b
    print("\nPASS determinism: every CLI command rerun with the same flags "
          "produced byte-identical files and stdout")


def test_extractor_round_trip_through_primary_loader(tmp_path):
    """A fixture corpus, extracted, must load cleanly and be well normalized."""
    from ficg.data import load_dataset_with_header
    from ficg_extractor import (extract_corpus, load_corpus, make_fixture,
                                offline_backends, write_dataset)

    corpus = tmp_path / "corpus"
    make_fixture(corpus, n_dialogues=3, turns=3, seed=0)
    dialogues = load_corpus(corpus)
    result = extract_corpus(dialogues, offline_backends())
    out = tmp_path / "extracted.jsonl"
    write_dataset(list(result.dialogues), result.dims, result.n_speakers, out)

    header, records = load_dataset_with_header(out)
    assert header.dims.to_dict() == result.dims
    assert len(records) == 3

    raw_by_id = {d.dialogue_id: d for d in dialogues}
    for rec in records:
        source = raw_by_id[rec.dialogue_id]
        for got, src in zip(rec.utterances, source.utterances):
            assert len(got.words) == len(src.words)
            assert got.word_text_feats.shape[0] == len(src.words)
            assert got.word_speech_feats.shape[0] == len(src.words)

    pitches = np.array([u.pitch_target for r in records for u in r.utterances])
    energies = np.array([u.energy_target for r in records for u in r.utterances])
    stats = {"pitch": (abs(pitches.mean()), abs(pitches.std() - 1.0)),
             "energy": (abs(energies.mean()), abs(energies.std() - 1.0))}
    for name, (mu, sigma_err) in stats.items():
        assert mu < 1e-6, f"{name} mean off by {mu}"
        assert sigma_err < 1e-6, f"{name} stddev off by {sigma_err}"
    print(f"\nPASS extractor: 3-dialogue fixture loads through the trainer's "
          f"validator; |pitch mean|={stats['pitch'][0]:.2e}, "
          f"|pitch std-1|={stats['pitch'][1]:.2e}, "
          f"|energy mean|={stats['energy'][0]:.2e}, "
          f"|energy std-1|={stats['energy'][1]:.2e}")
