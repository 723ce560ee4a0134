//! Learning-rate schedule.

/// Linear decay from `lr_start` to `lr_end` over `schedule_epochs`, constant
/// at `lr_end` afterwards. Epoch 0 runs at `lr_start`.
pub fn lr_at(lr_start: f32, lr_end: f32, schedule_epochs: u32, epoch: u32) -> f32 {
    if schedule_epochs == 0 || epoch >= schedule_epochs {
        return lr_end;
    }
    let frac = epoch as f64 / schedule_epochs as f64;
    (lr_start as f64 + (lr_end as f64 - lr_start as f64) * frac) as f32
}
