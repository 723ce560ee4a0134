//! Gate: the generated classes must actually be learnable from the clean
//! images by a small conv net. Guards against silently breaking the
//! renderer in a way that leaves classes ambiguous.

use cqd_data::{generate_dataset, stratified_split, GenConfig};
use cqd_degrade::image_buf::to_chw;
use cqd_nets::{ArchSpec, Model};
use cqd_tensor::rng::seeded_rng;
use cqd_tensor::{Graph, SgdState, Tensor};
use rand::seq::SliceRandom;

#[test]
fn four_way_fine_grained_classes_are_learnable() {
    let cfg = GenConfig {
        num_classes: 4,
        per_class: 200,
        side: 64,
        seed: 21,
        clutter: (3, 5),
    };
    let (_, samples) = generate_dataset(&cfg).unwrap();
    let labels: Vec<u32> = samples.iter().map(|s| s.label).collect();
    let split = stratified_split(&labels, (0.8, 0.0, 0.2), 1).unwrap();

    let mut model = Model::new(ArchSpec::shallow(64), 4, 7).unwrap();
    let mut opt = SgdState::new(&model.params);
    let mut order = split.train.clone();
    let mut rng = seeded_rng(3);
    let batch = 16;
    for epoch in 0..30 {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let imgs: Vec<_> = chunk.iter().map(|&i| &samples[i].image).collect();
            let x = to_chw(&imgs).unwrap();
            let mut q = Tensor::zeros(vec![chunk.len(), 4]);
            for (r, &i) in chunk.iter().enumerate() {
                q.data_mut()[r * 4 + samples[i].label as usize] = 1.0;
            }
            let mut g = Graph::new();
            let xv = g.constant(x);
            let qv = g.constant(q);
            let (vars, z) = model.forward(&mut g, xv, false).unwrap();
            let p = g.softmax(z).unwrap();
            let loss = g.cross_entropy_mean(p, qv).unwrap();
            g.backward(loss).unwrap();
            let grads: Vec<&Tensor> = vars.iter().map(|v| g.grad(*v).unwrap()).collect();
            let lr = cqd_tensor::lr_at(0.02, 0.002, 30, epoch);
            opt.step(&mut model.params, &grads, lr, 0.9, 5e-4).unwrap();
        }
    }

    let test_imgs: Vec<_> = split.test.iter().map(|&i| &samples[i].image).collect();
    let x = to_chw(&test_imgs).unwrap();
    let pred = model.predict(&x).unwrap();
    let correct = pred
        .iter()
        .zip(&split.test)
        .filter(|(p, &i)| **p == samples[i].label as usize)
        .count();
    let acc = correct as f64 / split.test.len() as f64;
    assert!(acc >= 0.85, "clean accuracy {acc:.3} below the 0.85 gate");
}
