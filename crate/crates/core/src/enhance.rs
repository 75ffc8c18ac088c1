//! Inference: decide one action on a thumbnail, apply it at full size.

use std::fmt::Write as _;

use crate::agent::{greedy_action, AgentNet};
use crate::error::Result;
use crate::filters::{apply_pipeline, ActionVector};
use crate::image::{resize_bicubic, Image};
use crate::nn::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Enhanced {
    pub action: ActionVector,
    pub image: Image,
}

/// Greedy action chosen on the `input_size` thumbnail.
pub fn choose_action<T: Real>(agent: &AgentNet<T>, image: &Image) -> Result<ActionVector> {
    let s = agent.config().input_size;
    let thumb = resize_bicubic(image, s, s)?;
    let (q, _) = agent.act(&thumb)?;
    greedy_action(&q)
}

/// Apply the thumbnail's greedy action to the original resolution image.
pub fn enhance<T: Real>(agent: &AgentNet<T>, image: &Image) -> Result<Enhanced> {
    let action = choose_action(agent, image)?;
    let image = apply_pipeline(image, &action)?;
    Ok(Enhanced { action, image })
}

/// JSON-style list of `{"name": ..., "value": ...}` in pipeline order,
/// values with four decimals.
pub fn parameter_report(action: &ActionVector) -> String {
    let mut out = String::from("[\n");
    let entries: Vec<String> = action
        .iter()
        .map(|(f, v)| format!("  {{\"name\": \"{}\", \"value\": {:.4}}}", f.name(), v + 0.0))
        .collect();
    let _ = write!(out, "{}", entries.join(",\n"));
    out.push_str("\n]\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentConfig;
    use crate::filters::Filter;
    use rand::SeedableRng;

    #[test]
    fn report_lists_filters_in_order() {
        let a = ActionVector::single(Filter::Exposure, 0.5).unwrap();
        let r = parameter_report(&a);
        assert!(r.starts_with("[\n  {\"name\": \"Dehaze\", \"value\": 0.0000},\n"));
        assert!(r.contains("{\"name\": \"Exposure\", \"value\": 0.5000}"));
        assert!(r.ends_with("{\"name\": \"Saturation\", \"value\": 0.0000}\n]\n"));
        assert_eq!(r.lines().count(), 14);
        let neg = parameter_report(&ActionVector::single(Filter::Tint, -0.0).unwrap());
        assert!(!neg.contains("-0.0000"));
    }

    #[test]
    fn forced_neutral_agent_is_identity_at_any_size() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut agent = AgentNet::<f32>::new(AgentConfig::default(), &mut rng).unwrap();
        agent.force_policy(&[16; 12]).unwrap();
        let img = crate::synth::SceneGenerator::new(0).render_rect(1, 90, 50);
        let out = enhance(&agent, &img).unwrap();
        assert_eq!(out.action, ActionVector::neutral());
        assert_eq!(out.image, img);
    }
}
