//! Forced-alignment input: Praat TextGrid phone tiers and the vowel tokens taken from them.

mod textgrid;
mod vowels;

pub use textgrid::{decode_textgrid_bytes, parse_textgrid, AlignmentTier, PhoneInterval};
pub use vowels::{
    extract_vowels, is_silence_label, pair_vowel_tokens, strip_stress, VowelInventory, VowelToken,
    ARPABET_VOWELS,
};
