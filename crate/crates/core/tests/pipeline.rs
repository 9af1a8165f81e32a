//! End-to-end use of the public API: files in, metrics out.

use std::io::Cursor;

use accent_eval_core::align::{extract_vowels, pair_vowel_tokens, parse_textgrid, VowelInventory};
use accent_eval_core::formant::{measure_token, synth, vf_rmse, FormantConfig};
use accent_eval_core::pitch::{estimate_f0, load_f0, write_f0, PitchConfig};
use accent_eval_core::ppg::{load_ppg, ppg_similarity, write_ppg, Posteriorgram};
use accent_eval_core::signal::{load_wav, write_wav_pcm16, Waveform};
use accent_eval_core::spectral::{load_cepstrum, mcd, mel_cepstrum, write_cepstrum, CepstrumConfig};
use accent_eval_core::text::{load_transcripts, wer};
use proptest::prelude::*;

const SR: u32 = 16_000;
const SEG: f64 = 0.2;

/// Silence, then one 200 ms vowel per target, then silence.
fn utterance(targets: &[(&str, f64, f64)]) -> (Waveform, String) {
    let pad = vec![0.0; (SEG * SR as f64) as usize];
    let mut samples = pad.clone();
    for &(_, f1, f2) in targets {
        let v = synth::vowel(f1, f2, 100.0, SR, SEG);
        let peak = v.samples().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        samples.extend(v.samples().iter().map(|x| 0.5 * x / peak));
    }
    samples.extend(&pad);
    let mut labels = vec!["sil"];
    labels.extend(targets.iter().map(|t| t.0));
    labels.push("sil");
    (Waveform::new(samples, SR).unwrap(), textgrid(&labels))
}

fn textgrid(labels: &[&str]) -> String {
    let xmax = SEG * labels.len() as f64;
    let mut s = format!(
        "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\nxmin = 0\nxmax = {xmax}\ntiers? <exists>\nsize = 1\nitem []:\n    item [1]:\n        class = \"IntervalTier\"\n        name = \"phones\"\n        xmin = 0\n        xmax = {xmax}\n        intervals: size = {}\n",
        labels.len()
    );
    for (k, l) in labels.iter().enumerate() {
        s.push_str(&format!(
            "        intervals [{}]:\n            xmin = {}\n            xmax = {}\n            text = \"{l}\"\n",
            k + 1,
            SEG * k as f64,
            SEG * (k + 1) as f64
        ));
    }
    s
}

fn measure(w: &Waveform, grid: &str) -> Vec<accent_eval_core::formant::FormantMeasurement> {
    let tiers = parse_textgrid(grid).unwrap();
    let tokens = extract_vowels(&tiers[0], &VowelInventory::default());
    let cfg = FormantConfig::default();
    tokens.iter().map(|t| measure_token(w, t, &cfg).unwrap()).collect()
}

#[test]
fn vowel_formants_through_wav_and_textgrid() {
    let targets = [("AA1", 750.0, 1200.0), ("IY1", 300.0, 2300.0), ("UW1", 350.0, 1000.0)];
    let (w, grid) = utterance(&targets);
    let w = load_wav(&write_wav_pcm16(&w)).unwrap();
    let gt = measure(&w, &grid);
    assert_eq!(gt.iter().map(|m| m.token.base_label.as_str()).collect::<Vec<_>>(), ["AA", "IY", "UW"]);
    for (m, &(_, f1, f2)) in gt.iter().zip(&targets) {
        assert!((m.f1 - f1).abs() / f1 < 0.1, "{m:?}");
        assert!((m.f2 - f2).abs() / f2 < 0.1, "{m:?}");
    }

    let pairs: Vec<_> = pair_vowel_tokens(
        &gt.iter().map(|m| m.token.clone()).collect::<Vec<_>>(),
        &gt.iter().map(|m| m.token.clone()).collect::<Vec<_>>(),
    )
    .into_iter()
    .map(|(a, b)| (gt[a.source_index].clone(), gt[b.source_index].clone()))
    .collect();
    assert_eq!(vf_rmse(&pairs).unwrap().pooled, 0.0);

    let shifted: Vec<_> = targets.iter().map(|&(l, f1, f2)| (l, f1 * 1.15, f2)).collect();
    let (sw, sgrid) = utterance(&shifted);
    let sys = measure(&sw, &sgrid);
    let pairs: Vec<_> = gt.iter().cloned().zip(sys).collect();
    let r = vf_rmse(&pairs).unwrap();
    assert!(r.f1 > 40.0 && r.f2 < r.f1, "{r:?}");
}

#[test]
fn feature_caches_round_trip() {
    let (w, _) = utterance(&[("AA1", 700.0, 1200.0), ("IY1", 300.0, 2300.0)]);

    let cep = mel_cepstrum(&w, &CepstrumConfig::default()).unwrap();
    let back = load_cepstrum(Cursor::new(write_cepstrum(&cep))).unwrap();
    assert_eq!(back, cep);
    assert_eq!(mcd(&cep, &back).unwrap(), 0.0);

    let f0 = estimate_f0(&w, &PitchConfig::default()).unwrap();
    assert_eq!(load_f0(Cursor::new(write_f0(&f0))).unwrap(), f0);

    let ppg = Posteriorgram::new(
        vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.8, 0.1], vec![0.25, 0.25, 0.5]],
        vec!["aa".into(), "iy".into(), "sil".into()],
        0.01,
    )
    .unwrap();
    let back = load_ppg(Cursor::new(write_ppg(&ppg))).unwrap();
    assert_eq!(back, ppg);
    let s = ppg_similarity(&ppg, &back).unwrap();
    assert!((s.ppg_cossim - 1.0).abs() < 1e-12 && s.ppg_js.abs() < 1e-12);
}

#[test]
fn transcripts_file_to_wer() {
    let jsonl = concat!(
        "{\"utterance_id\":\"p252_005\",\"reference\":\"The butter was bitter.\",\"hypothesis\":\"the butter was better\"}\n",
        "\n",
        "{\"utterance_id\":\"p252_006\",\"reference\":\"Aye, it's braw!\",\"hypothesis\":\"aye its braw\"}\n",
    );
    let recs = load_transcripts(Cursor::new(jsonl)).unwrap();
    let rates: Vec<f64> = recs.iter().map(|r| wer(&r.pair()).unwrap()).collect();
    assert_eq!(rates, [0.25, 1.0 / 3.0]);
    let bad = load_transcripts(Cursor::new("{\"utterance_id\": 1}\n")).unwrap_err();
    assert!(bad.is_parse(), "{bad}");
}

proptest! {
    #[test]
    fn wer_ignores_case_and_spacing(words in prop::collection::vec("[a-z]{1,6}", 1..8), hyp in prop::collection::vec("[a-z]{1,6}", 0..8)) {
        let plain = accent_eval_core::text::TranscriptPair { reference: words.join(" "), hypothesis: hyp.join(" ") };
        let noisy = accent_eval_core::text::TranscriptPair {
            reference: format!("  {}  ", words.join("   ").to_uppercase()),
            hypothesis: hyp.join("\t"),
        };
        prop_assert_eq!(wer(&plain).unwrap(), wer(&noisy).unwrap());
    }
}
