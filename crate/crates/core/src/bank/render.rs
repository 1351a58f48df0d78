use serde::{Deserialize, Serialize};

use super::{BankError, Item, Template};
use crate::policy::PresentationParams;

/// Lower bound on media units per rendering, so that largest-remainder
/// apportionment lands within 0.1 of any requested mix.
pub const MIN_MEDIA_UNITS: usize = 10;

const MIX_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Image,
    Sound,
    Text,
}

impl Modality {
    const ALL: [Modality; 3] = [Modality::Image, Modality::Sound, Modality::Text];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaUnit {
    pub modality: Modality,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedBlock {
    /// Index of the template block this renders.
    pub block: usize,
    pub units: Vec<MediaUnit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    pub blocks: Vec<RenderedBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedContent {
    pub item_id: String,
    pub screens: Vec<Screen>,
    pub text_blocks: Vec<String>,
    pub image_descriptors: Vec<String>,
    pub audio_descriptors: Vec<String>,
    pub options: Vec<String>,
    pub params: PresentationParams,
}

impl RenderedContent {
    pub fn unit_count(&self) -> usize {
        self.text_blocks.len() + self.image_descriptors.len() + self.audio_descriptors.len()
    }

    /// Realized (image, sound, text) shares by unit count.
    pub fn realized_mix(&self) -> [f64; 3] {
        let n = self.unit_count().max(1) as f64;
        [
            self.image_descriptors.len() as f64 / n,
            self.audio_descriptors.len() as f64 / n,
            self.text_blocks.len() as f64 / n,
        ]
    }
}

/// Source of rendered item content. Implementations must be stateless or
/// synchronize internally; the bank and provider are shared across sessions.
pub trait ContentProvider: Send + Sync {
    fn render(&self, item: &Item, params: &PresentationParams) -> Result<RenderedContent, BankError>;
}

/// Deterministic template expansion.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateProvider;

fn expand(item_id: &str, template: &Template, text: &str) -> Result<String, BankError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        let close = tail.find('}').ok_or_else(|| BankError::UnresolvedSlot {
            item: item_id.to_string(),
            slot: tail.to_string(),
        })?;
        let name = &tail[..close];
        let value = template.slots.get(name).ok_or_else(|| BankError::UnresolvedSlot {
            item: item_id.to_string(),
            slot: name.to_string(),
        })?;
        out.push_str(&value.render());
        rest = &tail[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Largest-remainder apportionment of `total` units; ties go to the earlier
/// modality.
fn apportion(shares: [f64; 3], total: usize) -> [usize; 3] {
    let exact: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&i, &j| {
        let ri = exact[i] - exact[i].floor();
        let rj = exact[j] - exact[j].floor();
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Smooth weighted round-robin so modalities interleave rather than cluster.
fn interleave(counts: [usize; 3]) -> Vec<Modality> {
    let total: usize = counts.iter().sum();
    let mut credit = [0i64; 3];
    let mut seq = Vec::with_capacity(total);
    for _ in 0..total {
        for (c, n) in credit.iter_mut().zip(counts) {
            *c += n as i64;
        }
        let pick = (0..3).rev().max_by_key(|&i| credit[i]).unwrap();
        credit[pick] -= total as i64;
        seq.push(Modality::ALL[pick]);
    }
    seq
}

impl ContentProvider for TemplateProvider {
    fn render(&self, item: &Item, params: &PresentationParams) -> Result<RenderedContent, BankError> {
        let blocks = &item.template.blocks;
        let texts = blocks
            .iter()
            .map(|b| {
                let raw = match (&b.simple, params.text_complexity < 0.0) {
                    (Some(simple), true) => simple,
                    _ => &b.text,
                };
                expand(&item.id, &item.template, raw)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let captions = blocks
            .iter()
            .zip(&texts)
            .map(|(b, text)| match &b.caption {
                Some(c) => expand(&item.id, &item.template, c),
                None => Ok(format!("illustration of: {text}")),
            })
            .collect::<Result<Vec<_>, _>>()?;

        let total = MIN_MEDIA_UNITS.max(blocks.len());
        let mix = params.media_mix;
        let sequence = interleave(apportion([mix.image, mix.sound, mix.text], total));

        let mut rendered: Vec<RenderedBlock> =
            (0..blocks.len()).map(|block| RenderedBlock { block, units: Vec::new() }).collect();
        let (mut text_blocks, mut images, mut audio) = (Vec::new(), Vec::new(), Vec::new());
        for (slot, modality) in sequence.into_iter().enumerate() {
            let b = slot % blocks.len();
            let content = match modality {
                Modality::Text => {
                    text_blocks.push(texts[b].clone());
                    texts[b].clone()
                }
                Modality::Image => {
                    let d = format!("image: {}", captions[b]);
                    images.push(d.clone());
                    d
                }
                Modality::Sound => {
                    let d = format!("audio narration: {}", texts[b]);
                    audio.push(d.clone());
                    d
                }
            };
            rendered[b].units.push(MediaUnit { modality, content });
        }

        let chunk = params.chunk_size.max(1) as usize;
        let mut screens = Vec::new();
        let mut iter = rendered.into_iter().peekable();
        while iter.peek().is_some() {
            screens.push(Screen { blocks: iter.by_ref().take(chunk).collect() });
        }

        Ok(RenderedContent {
            item_id: item.id.clone(),
            screens,
            text_blocks,
            image_descriptors: images,
            audio_descriptors: audio,
            options: item.options.clone(),
            params: params.clone(),
        })
    }
}

/// Render through `provider` and enforce the chunking and media-mix
/// invariants on whatever it returns.
pub fn render_item(
    item: &Item,
    params: &PresentationParams,
    provider: &dyn ContentProvider,
) -> Result<RenderedContent, BankError> {
    let out = provider.render(item, params)?;
    let chunk = params.chunk_size.max(1) as usize;
    if out.screens.iter().any(|s| s.blocks.len() > chunk) {
        return Err(BankError::RenderInvariant {
            item: item.id.clone(),
            reason: format!("chunk size {chunk}"),
        });
    }
    let want = [params.media_mix.image, params.media_mix.sound, params.media_mix.text];
    let got = out.realized_mix();
    if want.iter().zip(got).any(|(w, g)| (w - g).abs() > MIX_TOLERANCE) {
        return Err(BankError::RenderInvariant {
            item: item.id.clone(),
            reason: format!("media mix {want:?} (realized {got:?})"),
        });
    }
    Ok(out)
}
