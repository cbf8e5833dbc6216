//! One upload cycle through the whole pipeline with a fake engine and an
//! echo backend. Prints the job JSON.

use std::sync::Arc;

use drivethru::corrector::EchoBackend;
use drivethru::imaging::PageImage;
use drivethru::pipeline::{self, CorrectionJob, CorrectionMode, JobOptions, PipelineDeps, UploadedFile};
use drivethru::{Dictionary, FakeEngine};

fn main() {
    let engine = FakeEngine::new()
        .with_id("p1.png", "Sing unik maneh, Bekecot pranyata ndu- weni untu")
        .with_id("p2.png", "kang uakeehhh banget lo.");
    let dict = Dictionary::parse("banyak\takeh\nmemiliki\tnduweni\n", "jav").unwrap();
    let deps =
        PipelineDeps::new(Arc::new(engine)).with_dictionary(dict).with_backend(Arc::new(EchoBackend::new()));

    let png = PageImage::filled_gray(64, 32, 240).unwrap().encode_png().unwrap();
    let files = vec![
        UploadedFile::new("p1.png", png.clone()),
        UploadedFile::new("p2.png", png.clone()),
        UploadedFile::new("broken.png", png[..20].to_vec()),
    ];
    let images = pipeline::validate_upload(files).unwrap();
    let options = JobOptions { language: "jav".into(), mode: CorrectionMode::FewShot, seed: 42 };
    let job = CorrectionJob::new("example", images, options).unwrap();

    let done = pipeline::run_job(job, &deps);
    println!("{}", done.to_json());
}
