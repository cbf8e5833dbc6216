//! Dictionary lookup of similar words for few-shot hints.

use drivethru::lexicon::{self, Dictionary, LcsKind, SelectionConfig};

const DICT: &str = "\
# indonesian<TAB>local
banyak\takeh
sangat\tbanget
memiliki\tnduweni
mengunyah\tmamah
gigi\tuntu
siput\tbekicot
";

fn main() {
    let dict = Dictionary::parse(DICT, "jav").unwrap();
    let ocr = "Bekecot pranyata ndu- weni untu kang uakeehhh banget lo.";

    let tokens = lexicon::candidate_tokens(ocr);
    println!("tokens: {tokens:?}");

    let cfg = SelectionConfig { rng_seed: Some(7), ..SelectionConfig::default() };
    for pair in lexicon::select_pairs(&tokens, &dict, &cfg) {
        println!("{:>10} -> {:<8} ({})  score {:.3}", pair.token, pair.candidate, pair.gloss, pair.score);
    }

    for (a, b) in [("naek", "nack"), ("bekecot", "bekicot")] {
        println!(
            "{a}/{b}: substring {:.3}, subsequence {:.3}",
            lexicon::similarity_with(a, b, LcsKind::Substring),
            lexicon::similarity_with(a, b, LcsKind::Subsequence)
        );
    }
}
