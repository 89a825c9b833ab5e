//! Lecture material: uploads are content-addressed, so identical bytes are
//! stored once, and deleting a lecture removes its files and questions.

use std::sync::Arc;

use satep::content::UploadedFile;
use satep::domain::{PersonProfile, Principal, QuestionDraft};
use satep::platform::ItemStatus;
use satep::{Platform, Settings, SystemClock};

fn main() -> satep::Result<()> {
    let dir = tempfile::tempdir().unwrap();
    let settings = Settings {
        password_rounds: 1000,
        ..Settings::default()
    };
    let platform = Platform::ephemeral(dir.path(), Arc::new(SystemClock), None, settings)?;
    let (id, _) = platform.seed_admin(&PersonProfile {
        name: "Ada".into(),
        surname: "Admin".into(),
        username: "root".into(),
        email: "root@admin.example".into(),
        department: "Informatics".into(),
    })?;
    let admin = Principal::Admin(id);

    let networks = platform.create_lecture(admin, "Computer Networks")?;
    let databases = platform.create_lecture(admin, "Databases")?;
    let slides = b"%PDF-1.4 pretend slides".to_vec();
    for (lecture, name) in [
        (networks.id, "week1.pdf"),
        (databases.id, "shared-intro.pdf"),
    ] {
        let f = platform.upload_file(
            admin,
            lecture,
            &UploadedFile {
                logical_name: name.into(),
                media_type: "application/pdf".into(),
                bytes: slides.clone(),
            },
        )?;
        println!("stored {} as {}", f.name, &f.digest[..12]);
    }
    println!("objects on disk: {}", platform.objects().len()?);

    platform.insert_question(
        admin,
        &QuestionDraft::GapFill {
            lecture: networks.id,
            question: "The transport protocol with a three-way handshake is ___".into(),
            answer: "TCP".into(),
        },
    )?;

    for l in platform.lecture_catalogue()? {
        println!("{}: {} {:?}", l.id, l.title, l.files);
    }

    let files = platform.list_files(admin, networks.id)?;
    let (record, bytes) = platform.download_file(admin, files[0].id)?;
    println!(
        "downloaded {} ({} bytes, {})",
        record.name,
        bytes.len(),
        record.media_type
    );

    for outcome in platform.delete_lectures(admin, &[networks.id])? {
        if let ItemStatus::Deleted { detail } = outcome.status {
            println!(
                "deleted lecture {}: {} files, {} multiple choice, {} gap fill",
                outcome.id, detail.files_removed, detail.mc_removed, detail.gf_removed
            );
        }
    }
    // The bytes survive because the other lecture still references them.
    println!("objects on disk: {}", platform.objects().len()?);
    platform.delete_lectures(admin, &[databases.id])?;
    println!("objects on disk: {}", platform.objects().len()?);
    Ok(())
}
