//! Writes a synthetic EMODB-style corpus: `gen_corpus <dir> [clips] [seconds]`.
fn main() {
    let mut args = std::env::args().skip(1);
    let dir = args.next().expect("usage: gen_corpus <dir> [clips] [seconds]");
    let n_clips: usize = args.next().map_or(105, |v| v.parse().expect("n_clips"));
    let secs: f64 = args.next().map_or(1.0, |v| v.parse().expect("seconds"));
    let paths = ser_core::synth::write_emodb_corpus(std::path::Path::new(&dir), n_clips, 0, secs)
        .expect("write corpus");
    println!("{} clips in {dir}", paths.len());
}
