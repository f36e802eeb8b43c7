use std::collections::BTreeSet;

use proptest::prelude::*;
use qigl::image_io::{decode_pgm, decode_png, encode_pgm, encode_png, load_dataset, load_image, save_image, ImageFormat};
use qigl::Error;
use qigl_core::imaging::GrayImage;

#[test]
fn pgm_layout_is_exact() {
    let img = GrayImage::new(2, 2, vec![0, 128, 255, 7]).unwrap();
    let bytes = encode_pgm(&img);
    assert_eq!(bytes, b"P5\n2 2\n255\n\x00\x80\xff\x07");
    assert_eq!(bytes.len(), 15);
}

#[test]
fn pgm_header_with_comments() {
    let img = decode_pgm(b"P5 # made by hand\n3 1\n# max\n255\nabc").unwrap();
    assert_eq!(img.pixels(), b"abc");
    assert!(decode_pgm(b"P2\n1 1\n255\n0").unwrap_err().contains("P5"));
    assert!(decode_pgm(b"P5\n2 2\n65535\n").unwrap_err().contains("maxval"));
    assert!(decode_pgm(b"P5\n4 4\n255\nxy").unwrap_err().contains("raster"));
    assert!(decode_pgm(b"P5\n4").is_err());
}

proptest! {
    #[test]
    fn codecs_round_trip(w in 1usize..16, h in 1usize..16, seed in any::<u64>()) {
        let px: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 13) as u8).collect();
        let img = GrayImage::new(w, h, px).unwrap();
        prop_assert_eq!(&decode_pgm(&encode_pgm(&img)).unwrap(), &img);
        prop_assert_eq!(&decode_png(&encode_png(&img).unwrap()).unwrap(), &img);
    }
}

#[test]
fn save_and_load_by_extension() {
    let dir = tempfile::tempdir().unwrap();
    let img = GrayImage::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
    for format in [ImageFormat::Pgm, ImageFormat::Png] {
        let path = dir.path().join(format!("x.{}", format.extension()));
        save_image(&img, &path, format).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);
    }
}

#[test]
fn failed_save_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("x.pgm");
    let img = GrayImage::filled(2, 2, 9).unwrap();
    assert!(matches!(save_image(&img, &path, ImageFormat::Pgm), Err(Error::Io { .. })));
    assert!(!path.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

fn write(dir: &std::path::Path, name: &str, img: &GrayImage) {
    save_image(img, &dir.join(name), ImageFormat::from_path(std::path::Path::new(name)).unwrap()).unwrap();
}

#[test]
fn dataset_loading() {
    let dir = tempfile::tempdir().unwrap();
    let none = BTreeSet::new();
    assert!(matches!(load_dataset(dir.path(), None, &none), Err(Error::Format { .. })));

    write(dir.path(), "b.pgm", &GrayImage::filled(64, 64, 10).unwrap());
    write(dir.path(), "a.png", &GrayImage::filled(64, 64, 20).unwrap());
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let ds = load_dataset(dir.path(), Some((64, 64)), &none).unwrap();
    assert_eq!(ds.len(), 2);
    // Filename order: a.png before b.pgm.
    assert_eq!(ds.images()[0].pixels()[0], 20);

    let excluded: BTreeSet<String> = ["a.png".to_string()].into();
    assert_eq!(load_dataset(dir.path(), None, &excluded).unwrap().len(), 1);

    write(dir.path(), "c.pgm", &GrayImage::filled(32, 32, 0).unwrap());
    match load_dataset(dir.path(), None, &none) {
        Err(Error::Format { path, message }) => {
            assert!(path.ends_with("c.pgm"), "{path:?}");
            assert!(message.contains("32x32"));
        }
        other => panic!("expected a dimension error, got {other:?}"),
    }
}

#[test]
fn unreadable_files_are_all_reported() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "good.pgm", &GrayImage::filled(4, 4, 1).unwrap());
    std::fs::write(dir.path().join("bad1.pgm"), b"P5\n4 4\n").unwrap();
    std::fs::write(dir.path().join("bad2.png"), b"not a png").unwrap();
    match load_dataset(dir.path(), None, &BTreeSet::new()) {
        Err(Error::Load(failures)) => {
            let names: Vec<_> = failures.iter().map(|(p, _)| p.file_name().unwrap().to_owned()).collect();
            assert_eq!(names, ["bad1.pgm", "bad2.png"]);
        }
        other => panic!("expected per-file errors, got {other:?}"),
    }
}
