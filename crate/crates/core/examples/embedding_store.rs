//! Writes an embedding store, reads it back and inspects the binary layout.
//! Also shows the `/embed` request body used to fill stores remotely.

use adiee::remote::{encode_request, EmbedKind, Payload};
use adiee::{read_store, write_store, EmbeddingStore, EmbeddingVector};

fn main() -> adiee::Result<()> {
    let mut store = EmbeddingStore::new(4)?;
    for (key, v) in [
        ("photos/cat.png", [0.1f32, -0.4, 0.9, 0.0]),
        ("photos/ant.png", [1.0, 2.0, 3.0, 4.0]),
        ("prompt/a cat", [0.5, 0.5, -0.5, 0.25]),
    ] {
        store.insert(EmbeddingVector::new(key, v.to_vec())?)?;
    }
    let path = std::env::temp_dir().join(format!("adiee-example-{}.adee", std::process::id()));
    write_store(&store, &path)?;
    let back = read_store(&path)?;
    let bytes = std::fs::read(&path).map_err(|e| adiee::Error::Io { path: path.clone(), source: e })?;
    std::fs::remove_file(&path).ok();

    println!("{} records of dim {}, {} bytes on disk", back.len(), back.dim(), bytes.len());
    println!("header: {:02x?}", &bytes[..20]);
    for v in back.iter() {
        println!("  {:<16} {:?}", v.key(), v.values());
    }
    assert_eq!(back.to_bytes(), bytes);

    println!(
        "\nPOST /embed {}",
        String::from_utf8_lossy(&encode_request(EmbedKind::ClipText, &Payload::Text("a cat")))
    );
    println!(
        "POST /embed {}",
        String::from_utf8_lossy(&encode_request(EmbedKind::DinoImage, &Payload::Image(b"\x89PNG")))
    );
    Ok(())
}
