//! Configuration is read from a file, then SATEP_ environment variables,
//! then `--set key=value` flags; later layers win.

use satep::config::{env_layer, flag_layer, parse_layer, Config};

fn main() {
    let file = parse_layer(
        "# deployment defaults\n\
         listen_address = 0.0.0.0:8080\n\
         data_root = /var/lib/satep\n\
         session_ttl_hours = 8\n",
    )
    .unwrap();
    let env = env_layer([
        ("SATEP_SESSION_TTL_HOURS".to_owned(), "24".to_owned()),
        ("SATEP_MAX_UPLOAD_MIB".to_owned(), "20".to_owned()),
        ("HOME".to_owned(), "/root".to_owned()),
    ]);
    let flags = flag_layer(&["listen_address=127.0.0.1:9000".to_owned()]).unwrap();

    let cfg = Config::from_layers(&[file.clone(), env, flags], false).unwrap();
    print!("{}", cfg.render());
    println!("database: {}", cfg.database_path());

    let seeded = flag_layer(&["rng_seed=42".to_owned()]).unwrap();
    match Config::from_layers(&[file.clone(), seeded.clone()], false) {
        Err(e) => println!("rng_seed without opt-in: {e}"),
        Ok(_) => unreachable!(),
    }
    let cfg = Config::from_layers(&[file, seeded], true).unwrap();
    println!("deterministic seed: {:?}", cfg.rng_seed);

    println!(
        "unknown key: {}",
        parse_layer("colour = blue")
            .and_then(|l| Config::from_layers(&[l], false))
            .unwrap_err()
    );
}
