//! Synthetic evaluation corpus: formant-synthesized vowels with aligned
//! TextGrids, posteriorgrams, embeddings and transcripts.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use accent_eval_core::formant::synth::vowel;
use accent_eval_core::signal::{write_wav_pcm16, Waveform};
use serde_json::json;

pub const SR: u32 = 16000;
pub const VOWEL_S: f64 = 0.15;
pub const EDGE_S: f64 = 0.05;

/// (label, F1, F2) per utterance.
pub const UTTERANCES: [(&str, &str, &[(&str, f64, f64)]); 3] = [
    ("u1", "please call stella", &[("IY1", 300.0, 2300.0), ("AA1", 700.0, 1200.0), ("UW1", 350.0, 900.0)]),
    ("u2", "ask her to bring these things", &[("EH1", 550.0, 1800.0), ("AO1", 550.0, 1000.0), ("IY1", 300.0, 2300.0)]),
    ("u3", "six spoons of fresh snow peas", &[("AE1", 750.0, 1700.0), ("UH1", 450.0, 1100.0), ("IY0", 320.0, 2250.0)]),
];

pub fn utterance_audio(vowels: &[(&str, f64, f64)], shift: f64) -> Waveform {
    let silence = vec![0.0; (EDGE_S * SR as f64) as usize];
    let mut samples = silence.clone();
    for &(_, f1, f2) in vowels {
        samples.extend_from_slice(vowel(f1 * (1.0 + shift), f2 * (1.0 + shift), 100.0, SR, VOWEL_S).samples());
    }
    samples.extend_from_slice(&silence);
    Waveform::new(samples, SR).unwrap()
}

pub fn textgrid(vowels: &[(&str, f64, f64)]) -> String {
    let mut iv = vec![("sil".to_string(), 0.0, EDGE_S)];
    let mut t = EDGE_S;
    for (label, _, _) in vowels {
        iv.push((label.to_string(), t, t + VOWEL_S));
        t += VOWEL_S;
    }
    iv.push(("sil".to_string(), t, t + EDGE_S));
    let end = t + EDGE_S;
    let mut s = format!(
        "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\nxmin = 0\nxmax = {end}\ntiers? <exists>\nsize = 1\nitem []:\n    item [1]:\n        class = \"IntervalTier\"\n        name = \"phones\"\n        xmin = 0\n        xmax = {end}\n        intervals: size = {}\n",
        iv.len()
    );
    for (k, (label, a, b)) in iv.iter().enumerate() {
        s.push_str(&format!(
            "        intervals [{}]:\n            xmin = {a}\n            xmax = {b}\n            text = \"{label}\"\n",
            k + 1
        ));
    }
    s
}

/// Deterministic 4-class posteriorgram, blended toward uniform by `blur`.
pub fn ppg_csv(seed: usize, blur: f64) -> String {
    let mut s = String::from("#hop=0.01\nAA,IY,UW,sil\n");
    for f in 0..40 {
        let k = (f / 10 + seed) % 4;
        let row: Vec<String> = (0..4)
            .map(|c| {
                let peaked = if c == k { 0.85 } else { 0.05 };
                format!("{}", (1.0 - blur) * peaked + blur * 0.25)
            })
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn embedding_json(tag: &str, utt: &str, tilt: f64) -> String {
    let values: Vec<f64> = (0..16).map(|i| ((i as f64) * 0.7).sin() + tilt * ((i as f64) * 1.3).cos()).collect();
    json!({"source_tag": tag, "utterance_id": utt, "values": values}).to_string()
}

/// Replaces the first `n` words of `text` with a wrong word.
pub fn corrupt(text: &str, n: usize) -> String {
    text.split(' ')
        .enumerate()
        .map(|(i, w)| if i < n { "uh" } else { w })
        .collect::<Vec<_>>()
        .join(" ")
}

pub struct SystemDegradation {
    pub name: &'static str,
    pub rank: u32,
    /// Relative formant shift.
    pub shift: f64,
    pub ppg_blur: f64,
    pub embedding_tilt: f64,
    pub wrong_words: usize,
}

pub fn identical(name: &'static str, rank: u32) -> SystemDegradation {
    SystemDegradation {
        name,
        rank,
        shift: 0.0,
        ppg_blur: 0.0,
        embedding_tilt: 0.0,
        wrong_words: 0,
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, bytes).unwrap();
}

/// Writes the corpus under `dir` and returns the manifest path.
pub fn build_corpus(dir: &Path, systems: &[SystemDegradation]) -> PathBuf {
    let mut gt = serde_json::Map::new();
    let mut outputs = serde_json::Map::new();
    for (k, (id, _, vowels)) in UTTERANCES.iter().enumerate() {
        write(&dir.join(format!("gt/{id}.wav")), write_wav_pcm16(&utterance_audio(vowels, 0.0)));
        write(&dir.join(format!("gt/{id}.TextGrid")), textgrid(vowels));
        write(&dir.join(format!("gt/{id}.ppg.csv")), ppg_csv(k, 0.0));
        write(&dir.join(format!("gt/{id}.genaid.json")), embedding_json("genaid", id, 0.0));
        write(&dir.join(format!("gt/{id}.wavlm.json")), embedding_json("wavlm", id, 0.0));
        gt.insert(
            id.to_string(),
            json!({
                "audio": format!("gt/{id}.wav"),
                "alignment": format!("gt/{id}.TextGrid"),
                "ppg": format!("gt/{id}.ppg.csv"),
                "accent_embeddings": {"genaid": format!("gt/{id}.genaid.json")},
                "speaker_embedding": format!("gt/{id}.wavlm.json"),
            }),
        );
    }
    for s in systems {
        let mut per = serde_json::Map::new();
        for (k, (id, text, vowels)) in UTTERANCES.iter().enumerate() {
            let d = s.name;
            write(&dir.join(format!("{d}/{id}.wav")), write_wav_pcm16(&utterance_audio(vowels, s.shift)));
            write(&dir.join(format!("{d}/{id}.TextGrid")), textgrid(vowels));
            write(&dir.join(format!("{d}/{id}.ppg.csv")), ppg_csv(k, s.ppg_blur));
            write(&dir.join(format!("{d}/{id}.genaid.json")), embedding_json("genaid", id, s.embedding_tilt));
            write(&dir.join(format!("{d}/{id}.wavlm.json")), embedding_json("wavlm", id, s.embedding_tilt));
            write(&dir.join(format!("{d}/{id}.txt")), corrupt(text, s.wrong_words));
            per.insert(
                id.to_string(),
                json!({
                    "audio": format!("{d}/{id}.wav"),
                    "alignment": format!("{d}/{id}.TextGrid"),
                    "ppg": format!("{d}/{id}.ppg.csv"),
                    "accent_embeddings": {"genaid": format!("{d}/{id}.genaid.json")},
                    "speaker_embedding": format!("{d}/{id}.wavlm.json"),
                    "transcript": format!("{d}/{id}.txt"),
                }),
            );
        }
        outputs.insert(s.name.to_string(), per.into());
    }
    let manifest = json!({
        "systems": systems.iter().map(|s| json!({"name": s.name, "hypothesized_rank": s.rank})).collect::<Vec<_>>(),
        "utterances": UTTERANCES.iter().map(|(id, text, _)| json!({"id": id, "text": text, "speaker": "p252"})).collect::<Vec<_>>(),
        "ground_truth": gt,
        "outputs": outputs,
        "settings": {"formant_ceiling_hz": 5000.0, "alignment_tier": "phones"}
    });
    let path = dir.join("manifest.json");
    write(&path, serde_json::to_string_pretty(&manifest).unwrap());
    path
}

/// Three systems degrading monotonically with rank.
pub fn graded_systems() -> Vec<SystemDegradation> {
    vec![
        identical("copysyn", 1),
        SystemDegradation {
            name: "mild",
            rank: 2,
            shift: 0.06,
            ppg_blur: 0.2,
            embedding_tilt: 0.3,
            wrong_words: 1,
        },
        SystemDegradation {
            name: "strong",
            rank: 3,
            shift: 0.15,
            ppg_blur: 0.5,
            embedding_tilt: 0.8,
            wrong_words: 3,
        },
    ]
}
