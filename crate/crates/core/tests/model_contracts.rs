mod support;

use cyscolor::nn;
use cyscolor::palette_gan::{loss_discriminator, loss_generator, lsgan_d_loss, lsgan_g_loss, PaletteTrainer};
use cyscolor::toy;
use proptest::prelude::*;

#[test]
fn losses_follow_closed_forms() {
    support::loss_formulas();
}

#[test]
fn fusion_is_a_weighted_sum() {
    support::fusion();
}

#[test]
fn analytic_gradients_match_finite_differences() {
    support::gradients();
}

#[test]
fn sampling_is_autoregressive_and_deterministic() {
    support::autoregressive();
}

#[test]
fn reported_losses_match_recorded_scores() {
    let (vocab, cats) = toy::dark_bright_vocab();
    let model = toy::palette_model(vocab, cats, 21).unwrap();
    let examples = toy::dark_bright_examples(&model, 10, 3).unwrap();
    let alpha = model.config().alpha;
    let mut trainer = PaletteTrainer::new(model).unwrap();
    for r in trainer.fit(&examples, 5, |_| {}).unwrap() {
        let n = r.d_real.len() as f64;
        let d: f64 = r
            .d_real
            .iter()
            .zip(&r.d_fake)
            .map(|(a, b)| loss_discriminator(*a, *b, alpha))
            .sum::<f64>()
            / n;
        let g: f64 = r.g_fake.iter().map(|s| loss_generator(*s, alpha)).sum::<f64>() / n;
        assert!((d - r.loss_d).abs() < 1e-12, "L_D {} vs {d}", r.loss_d);
        assert!((g - r.loss_g).abs() < 1e-12, "L_G {} vs {g}", r.loss_g);
    }
}

#[test]
fn identical_seeds_give_identical_trajectories() {
    let run = || {
        let (vocab, cats) = toy::dark_bright_vocab();
        let model = toy::palette_model(vocab, cats, 4).unwrap();
        let examples = toy::dark_bright_examples(&model, 12, 6).unwrap();
        let mut trainer = PaletteTrainer::new(model).unwrap();
        let losses: Vec<(u64, u64)> = trainer
            .fit(&examples, 8, |_| {})
            .unwrap()
            .iter()
            .map(|r| (r.loss_d.to_bits(), r.loss_g.to_bits()))
            .collect();
        (losses, trainer.into_model().version().unwrap())
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn losses_are_non_negative(real in -10.0f64..10.0, fake in -10.0f64..10.0, alpha in 0.001f64..0.999) {
        prop_assert!(loss_discriminator(real, fake, alpha) >= 0.0);
        prop_assert!(loss_generator(fake, alpha) >= 0.0);
    }

    #[test]
    fn batch_losses_average_the_scalar_form(
        scores in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..16),
        alpha in 0.001f64..0.999,
    ) {
        let real: Vec<f64> = scores.iter().map(|s| s.0).collect();
        let fake: Vec<f64> = scores.iter().map(|s| s.1).collect();
        let n = scores.len() as f64;
        let rt = nn::rows(&[real.clone()]).unwrap().squeeze(0).unwrap();
        let ft = nn::rows(&[fake.clone()]).unwrap().squeeze(0).unwrap();
        let d = lsgan_d_loss(&rt, &ft, alpha).unwrap().to_scalar::<f64>().unwrap();
        let g = lsgan_g_loss(&ft, alpha).unwrap().to_scalar::<f64>().unwrap();
        let want_d: f64 = scores.iter().map(|(r, f)| support::oracle_loss_d(*r, *f, alpha)).sum::<f64>() / n;
        let want_g: f64 = fake.iter().map(|f| support::oracle_loss_g(*f, alpha)).sum::<f64>() / n;
        prop_assert!((d - want_d).abs() < 1e-12);
        prop_assert!((g - want_g).abs() < 1e-12);
    }
}
