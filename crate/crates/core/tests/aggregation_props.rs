use std::collections::BTreeMap;

use proptest::prelude::*;
use tipa_core::{
    aggregate, uniform_average, AdapterCheckpoint, Contribution, LanguageId, Manifest, MergeOptions, Tensor,
};

fn lang(i: usize) -> LanguageId {
    LanguageId::new(&format!("p{i:02}")).unwrap()
}

/// (shapes shared by all members, member data, raw positive weights)
type PoolCase = (Vec<Vec<usize>>, Vec<Vec<Vec<f32>>>, Vec<f64>);

fn pool() -> impl Strategy<Value = PoolCase> {
    let shapes = prop::collection::vec(prop::collection::vec(1usize..=4, 1..=2), 1..=3);
    (shapes, 2usize..=10).prop_flat_map(|(shapes, n)| {
        let member = shapes
            .iter()
            .map(|s| prop::collection::vec(-100.0f32..100.0, s.iter().product::<usize>()))
            .collect::<Vec<_>>();
        (
            Just(shapes),
            prop::collection::vec(member, n),
            prop::collection::vec(0.01f64..1.0, n),
        )
    })
}

fn checkpoint(i: usize, shapes: &[Vec<usize>], data: &[Vec<f32>]) -> AdapterCheckpoint {
    let tensors = shapes
        .iter()
        .zip(data)
        .enumerate()
        .map(|(t, (s, d))| (format!("t{t}"), Tensor::new(s.clone(), d.clone()).unwrap()))
        .collect();
    AdapterCheckpoint::new(tensors, Manifest::synthesized(lang(i).as_str()))
}

fn normalize(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matches_scalar_reference_and_stays_convex((shapes, data, raw) in pool()) {
        let weights = normalize(&raw);
        let ckpts: Vec<_> = data.iter().enumerate().map(|(i, d)| checkpoint(i, &shapes, d)).collect();
        let ids: Vec<_> = (0..ckpts.len()).map(lang).collect();
        let contribs: Vec<_> = ids.iter().zip(&ckpts).zip(&weights)
            .map(|((l, c), &w)| Contribution { language: l, checkpoint: c, weight: w })
            .collect();
        let out = aggregate(&LanguageId::new("tt").unwrap(), &contribs, &MergeOptions::default()).unwrap();
        for (t, _) in shapes.iter().enumerate() {
            let got = out.tensor(&format!("t{t}")).unwrap().data();
            for e in 0..got.len() {
                let mut reference = 0.0f64;
                let mut lo = f32::INFINITY;
                let mut hi = f32::NEG_INFINITY;
                for m in 0..data.len() {
                    let x = data[m][t][e];
                    reference += weights[m] * x as f64;
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                let g = got[e] as f64;
                let scale = reference.abs().max(1e-30);
                prop_assert!((g - reference).abs() <= 1e-6 * scale || (g - reference).abs() <= f32::EPSILON as f64 * hi.abs().max(lo.abs()) as f64,
                    "{g} vs {reference}");
                let (lo1, hi1) = (lo.next_down(), hi.next_up());
                prop_assert!(got[e] >= lo1 && got[e] <= hi1, "{} outside [{lo}, {hi}]", got[e]);
            }
        }
    }

    #[test]
    fn input_order_does_not_matter((shapes, data, raw) in pool()) {
        let weights = normalize(&raw);
        let ckpts: Vec<_> = data.iter().enumerate().map(|(i, d)| checkpoint(i, &shapes, d)).collect();
        let ids: Vec<_> = (0..ckpts.len()).map(lang).collect();
        let mut contribs: Vec<_> = ids.iter().zip(&ckpts).zip(&weights)
            .map(|((l, c), &w)| Contribution { language: l, checkpoint: c, weight: w })
            .collect();
        let t = LanguageId::new("tt").unwrap();
        let a = aggregate(&t, &contribs, &MergeOptions::default()).unwrap();
        contribs.reverse();
        let b = aggregate(&t, &contribs, &MergeOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn equal_weights_equal_uniform((shapes, data, _raw) in pool()) {
        let ckpts: Vec<_> = data.iter().enumerate().map(|(i, d)| checkpoint(i, &shapes, d)).collect();
        let ids: Vec<_> = (0..ckpts.len()).map(lang).collect();
        let w = 1.0 / ckpts.len() as f64;
        let contribs: Vec<_> = ids.iter().zip(&ckpts)
            .map(|(l, c)| Contribution { language: l, checkpoint: c, weight: w })
            .collect();
        let t = LanguageId::new("tt").unwrap();
        let a = aggregate(&t, &contribs, &MergeOptions::default()).unwrap();
        let pairs: Vec<_> = ids.iter().zip(&ckpts).collect();
        let b = uniform_average(&t, &pairs, &MergeOptions::default()).unwrap();
        prop_assert_eq!(a.tensors(), b.tensors());
    }
}

#[test]
fn singleton_is_bit_identical() {
    let c = checkpoint(0, &[vec![2, 3]], &[vec![0.1, -0.2, 1e-30, 3.5e10, -0.0, 7.0]]);
    let l = lang(0);
    let out = aggregate(
        &LanguageId::new("tt").unwrap(),
        &[Contribution { language: &l, checkpoint: &c, weight: 1.0 }],
        &MergeOptions::default(),
    )
    .unwrap();
    let bits = |ck: &AdapterCheckpoint| -> BTreeMap<String, Vec<u32>> {
        ck.tensors().iter().map(|(n, t)| (n.clone(), t.data().iter().map(|x| x.to_bits()).collect())).collect()
    };
    assert_eq!(bits(&out), bits(&c));
}
