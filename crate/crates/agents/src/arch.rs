//! Layer stacks for image states.

use nncore::LayerSpec;

/// Convolutional torso ending in a ReLU feature vector. 84-pixel inputs use
/// the classic three-conv Atari stack; inputs under 36 pixels use a two-conv
/// stack that still fits (the third conv of the Atari stack would not).
pub fn torso(state_shape: &[usize]) -> Vec<LayerSpec> {
    let edge = state_shape[1].min(state_shape[2]);
    if edge >= 36 {
        vec![
            LayerSpec::conv(32, 8, 4),
            LayerSpec::Relu,
            LayerSpec::conv(64, 4, 2),
            LayerSpec::Relu,
            LayerSpec::conv(64, 3, 1),
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::dense(512),
            LayerSpec::Relu,
        ]
    } else {
        vec![
            LayerSpec::conv(16, 8, 4),
            LayerSpec::Relu,
            LayerSpec::conv(32, 3, 1),
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::dense(256),
            LayerSpec::Relu,
        ]
    }
}

/// Torso plus a dueling or plain linear Q head.
pub fn q_network(state_shape: &[usize], actions: usize, dueling: bool) -> Vec<LayerSpec> {
    let mut specs = torso(state_shape);
    specs.push(if dueling {
        LayerSpec::DuelingHead { actions }
    } else {
        LayerSpec::dense(actions)
    });
    specs
}
