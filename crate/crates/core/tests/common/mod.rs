//! Seeded fixture worlds shared by the integration and acceptance tests.
#![allow(dead_code)]

use adiee::{EditSequence, EmbeddingStore, EmbeddingVector, Method, Role, ScoredRecord, Source, SyntheticSample};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CLIP_DIM: usize = 8;
pub const DINO_DIM: usize = 4;

fn put(store: &mut EmbeddingStore, key: &str, values: Vec<f64>) {
    let v = EmbeddingVector::new(key, values.into_iter().map(|x| x as f32).collect()).unwrap();
    store.insert(v).unwrap();
}

fn random_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Unit vector orthogonal to e0.
fn orthogonal_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut u = random_vec(rng, dim);
        u[0] = 0.0;
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 {
            return u.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Output image whose shift from `input` has cosine `c` with e0, the
/// prompt shift used throughout.
fn planted_output(rng: &mut impl Rng, input: &[f64], c: f64) -> Vec<f64> {
    let u = orthogonal_unit(rng, input.len());
    let m = rng.gen_range(0.5..1.5);
    let s = (1.0 - c * c).max(0.0).sqrt();
    input
        .iter()
        .enumerate()
        .map(|(i, &x)| x + m * (if i == 0 { c } else { 0.0 } + s * u[i]))
        .collect()
}

pub struct Learnable {
    pub clip: EmbeddingStore,
    pub dino: EmbeddingStore,
    pub samples: Vec<SyntheticSample>,
    pub records: Vec<ScoredRecord>,
    pub clip_d: Vec<f64>,
}

impl Learnable {
    /// Ground-truth score on [0, 10].
    pub fn target(&self, i: usize) -> f64 {
        10.0 * self.clip_d[i].clamp(0.0, 1.0)
    }
}

/// Items whose label is `clamp(CLIP-D, 0, 1)`, with CLIP-D ~ U(-0.1, 1).
pub fn learnable(n: usize, seed: u64, prefix: &str) -> Learnable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clip = EmbeddingStore::new(CLIP_DIM).unwrap();
    let mut dino = EmbeddingStore::new(DINO_DIM).unwrap();
    let (mut samples, mut records, mut clip_d) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let id = format!("{prefix}{i:05}");
        let keys = [
            format!("{id}/in"),
            format!("{id}/out"),
            format!("{id}/gt"),
            format!("{id}/src"),
            format!("{id}/tgt"),
        ];
        let c: f64 = rng.gen_range(-0.1..1.0);
        let input = random_vec(&mut rng, CLIP_DIM);
        let output = planted_output(&mut rng, &input, c);
        let mut gt = input.clone();
        gt[0] += 1.0;
        let src = random_vec(&mut rng, CLIP_DIM);
        let mut tgt = src.clone();
        tgt[0] += 1.0;
        put(&mut clip, &keys[0], input);
        put(&mut clip, &keys[1], output);
        put(&mut clip, &keys[2], gt);
        put(&mut clip, &keys[3], src);
        put(&mut clip, &keys[4], tgt);
        for k in &keys[..3] {
            put(&mut dino, k, random_vec(&mut rng, DINO_DIM));
        }
        let sample = SyntheticSample {
            sample_id: id.clone(),
            instruction: format!("edit number {i}"),
            input_prompt: format!("a photo {i}"),
            target_prompt: format!("an edited photo {i}"),
            method: Method::MagicBrush,
            role: Role::Candidate,
            input_key: keys[0].clone(),
            gt_key: keys[2].clone(),
            candidate_key: keys[1].clone(),
            input_prompt_key: keys[3].clone(),
            target_prompt_key: keys[4].clone(),
        };
        records.push(ScoredRecord {
            record_id: id,
            input_key: sample.input_key.clone(),
            output_key: sample.candidate_key.clone(),
            gt_key: Some(sample.gt_key.clone()),
            input_prompt_key: Some(sample.input_prompt_key.clone()),
            target_prompt_key: Some(sample.target_prompt_key.clone()),
            method: Some(sample.method),
            instruction: sample.instruction.clone(),
            score: Some(c.clamp(0.0, 1.0)),
            source: Source::Synthetic,
            question: None,
            answer: None,
        });
        samples.push(sample);
        clip_d.push(c);
    }
    Learnable { clip, dino, samples, records, clip_d }
}

const METHODS: [Method; 9] = [
    Method::CycleDiffusion,
    Method::DiffEdit,
    Method::PromptToPrompt,
    Method::Pix2PixZero,
    Method::SDEdit,
    Method::Text2LIVE,
    Method::InstructPix2Pix,
    Method::MagicBrush,
    Method::AURORA,
];

/// A manifest touching every labeler branch: per input one ground truth,
/// one input copy and one candidate per editing method.
pub fn labeler_world(n_inputs: usize, seed: u64) -> (Vec<SyntheticSample>, EmbeddingStore, EmbeddingStore) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clip = EmbeddingStore::new(CLIP_DIM).unwrap();
    let mut dino = EmbeddingStore::new(DINO_DIM).unwrap();
    let mut samples = Vec::new();
    for i in 0..n_inputs {
        let base = format!("img{i:03}");
        let (kin, kgt, ksrc, ktgt) = (format!("{base}/in"), format!("{base}/gt"), format!("{base}/src"), format!("{base}/tgt"));
        let input = random_vec(&mut rng, CLIP_DIM);
        let gt = planted_output(&mut rng, &input, 0.9);
        let src = random_vec(&mut rng, CLIP_DIM);
        let mut tgt = src.clone();
        tgt[0] += 1.0;
        let dino_in = random_vec(&mut rng, DINO_DIM);
        let dino_gt: Vec<f64> = dino_in.iter().map(|x| x + rng.gen_range(-0.3..0.3)).collect();
        put(&mut clip, &kin, input.clone());
        put(&mut clip, &kgt, gt.clone());
        put(&mut clip, &ksrc, src);
        put(&mut clip, &ktgt, tgt);
        put(&mut dino, &kin, dino_in.clone());
        put(&mut dino, &kgt, dino_gt);
        let sample = |id: String, method, role, candidate: &str| SyntheticSample {
            sample_id: id,
            instruction: format!("make scene {i} brighter"),
            input_prompt: format!("scene {i}"),
            target_prompt: format!("bright scene {i}"),
            method,
            role,
            input_key: kin.clone(),
            gt_key: kgt.clone(),
            candidate_key: candidate.to_string(),
            input_prompt_key: ksrc.clone(),
            target_prompt_key: ktgt.clone(),
        };
        samples.push(sample(format!("{base}-gt"), Method::GroundTruth, Role::GroundTruth, &kgt));
        samples.push(sample(format!("{base}-copy"), Method::InputCopy, Role::InputCopy, &kin));
        for m in METHODS {
            let key = format!("{base}/{}", m.as_str());
            let c = rng.gen_range(-0.3..1.0);
            let out = planted_output(&mut rng, &input, c);
            let d: Vec<f64> = dino_in.iter().map(|x| x + rng.gen_range(-1.0..1.0)).collect();
            put(&mut clip, &key, out);
            put(&mut dino, &key, d);
            samples.push(sample(format!("{base}-{}", m.as_str()), m, Role::Candidate, &key));
        }
    }
    (samples, clip, dino)
}

pub fn sequences(n: usize, seed: u64) -> Vec<EditSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let l = rng.gen_range(1..=5);
            EditSequence::new(
                format!("seq{i:03}"),
                (0..=l).map(|k| format!("seq{i:03}/{k}")).collect(),
                (1..=l).map(|k| format!("edit {k} of sequence {i}")).collect(),
            )
            .unwrap()
        })
        .collect()
}

/// Independent percentile: smallest sample value with at least `p`% of the
/// data at or below it.
pub fn counting_percentile(values: &[f64], p: f64) -> f64 {
    let n = values.len() as f64;
    let mut best = f64::INFINITY;
    for &v in values {
        let at_or_below = values.iter().filter(|&&w| w <= v).count() as f64;
        if at_or_below * 100.0 >= p * n && v < best {
            best = v;
        }
    }
    best
}

/// Items with the given CLIP-D values, labeled like [`learnable`].
pub fn learnable_with(cs: &[f64], seed: u64, prefix: &str) -> Learnable {
    let mut world = learnable(cs.len(), seed, prefix);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut clip = EmbeddingStore::new(CLIP_DIM).unwrap();
    for (i, &c) in cs.iter().enumerate() {
        let s = &world.samples[i];
        for key in [&s.input_key, &s.gt_key, &s.input_prompt_key, &s.target_prompt_key] {
            clip.insert(world.clip.get(key).unwrap().clone()).unwrap();
        }
        let input = world.clip.get(&s.input_key).unwrap().to_f64();
        put(&mut clip, &s.candidate_key, planted_output(&mut rng, &input, c));
        world.records[i].score = Some(c.clamp(0.0, 1.0));
        world.clip_d[i] = c;
    }
    world.clip = clip;
    world
}

pub struct CliWorld {
    pub dir: std::path::PathBuf,
}

impl CliWorld {
    pub fn path(&self, name: &str) -> String {
        self.dir.join(name).display().to_string()
    }
}

/// Writes every input file the CLI commands consume into `dir`.
pub fn write_cli_world(dir: &std::path::Path) -> CliWorld {
    use adiee::{jsonl, write_store};

    let (samples, clip, dino) = labeler_world(6, 11);
    jsonl::write(dir.join("manifest.jsonl"), &samples).unwrap();
    write_store(&clip, dir.join("clip.adee")).unwrap();
    write_store(&dino, dir.join("dino.adee")).unwrap();
    jsonl::write(dir.join("sequences.jsonl"), &sequences(8, 12)).unwrap();

    let learn = learnable(300, 13, "t");
    jsonl::write(dir.join("train.jsonl"), &learn.records).unwrap();
    write_store(&learn.clip, dir.join("learn_clip.adee")).unwrap();
    write_store(&learn.dino, dir.join("learn_dino.adee")).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut pointwise = String::new();
    let mut pairwise = String::new();
    let mut ranked = String::new();
    for i in 0..60 {
        let quality: f64 = rng.gen_range(0.0..1.0);
        let humans: Vec<f64> = (0..3).map(|_| (quality + rng.gen_range(-0.2..0.2)).clamp(0.0, 1.0)).collect();
        let model = (10.0 * quality + rng.gen_range(-2.0..2.0)).clamp(0.0, 10.0);
        pointwise += &format!(
            "{}\n",
            serde_json::json!({"id": format!("t{i:05}"), "method": format!("m{}", i % 3), "human_scores": humans, "model_score": model})
        );
        let (a, b): (f64, f64) = (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
        let label = if (a - b).abs() < 1.0 { "tie" } else if a > b { "A" } else { "B" };
        pairwise += &format!(
            "{}\n",
            serde_json::json!({"id": format!("p{i}"), "score_a": a, "score_b": b, "human_label": label})
        );
        ranked += &format!("{}\n", serde_json::json!({"method": format!("model{}", i % 5), "score": model}));
    }
    std::fs::write(dir.join("pointwise.jsonl"), pointwise).unwrap();
    std::fs::write(dir.join("pairwise.jsonl"), pairwise).unwrap();
    std::fs::write(dir.join("model_scores.jsonl"), ranked).unwrap();
    let reference: String = (0..5)
        .map(|i| format!("{}\n", serde_json::json!({"method": format!("model{i}"), "rank": i + 1})))
        .collect();
    std::fs::write(dir.join("reference.jsonl"), reference).unwrap();
    CliWorld { dir: dir.to_path_buf() }
}

pub fn run_cli(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_adiee"))
        .args(args)
        .env_remove("ADIEE_ENDPOINT")
        .output()
        .expect("binary runs")
}

/// One invocation per subcommand; each writes its primary output to `out`.
pub fn cli_commands(w: &CliWorld, out: &str) -> Vec<Vec<String>> {
    let stores = ["--store", &format!("clip={}", w.path("clip.adee")), "--store", &format!("dino={}", w.path("dino.adee"))]
        .map(String::from);
    let learn = [
        "--store",
        &format!("clip={}", w.path("learn_clip.adee")),
        "--store",
        &format!("dino={}", w.path("learn_dino.adee")),
    ]
    .map(String::from);
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let with = |mut a: Vec<String>, extra: &[String]| {
        a.extend_from_slice(extra);
        a
    };
    let o = |name: &str| format!("{out}/{name}");
    vec![
        with(s(&["thresholds", "--manifest", &w.path("manifest.jsonl"), "--out", &o("thresholds.json")]), &stores),
        with(s(&["label-synthetic", "--manifest", &w.path("manifest.jsonl"), "--seed", "3", "--out", &o("synthetic.jsonl")]), &stores),
        s(&["label-multiturn", "--manifest", &w.path("sequences.jsonl"), "--pairs", "3", "--seed", "3", "--out", &o("multiturn.jsonl")]),
        s(&["build", "--records", &w.path("train.jsonl"), "--seed", "3", "--out", &o("training.jsonl")]),
        with(
            s(&["train-probe", "--records", &w.path("train.jsonl"), "--epochs", "20", "--seed", "3", "--out", &o("probe.txt")]),
            &learn,
        ),
        with(s(&["score", "--params", &o("probe.txt"), "--records", &w.path("train.jsonl"), "--out", &o("scores.jsonl")]), &learn),
        s(&["eval-pointwise", "--input", &w.path("pointwise.jsonl"), "--out", &o("pointwise.json")]),
        s(&["eval-pairwise", "--input", &w.path("pairwise.jsonl"), "--tie-epsilon", "1", "--out", &o("pairwise.json")]),
        s(&["rank", "--input", &w.path("model_scores.jsonl"), "--reference", &w.path("reference.jsonl"), "--out", &o("rank.json")]),
    ]
}
