//! Idcard schema fidelity: SDL spellings and a full create/read round-trip.

use std::sync::Arc;

use idvault::api::Backend;
use idvault::clock::SystemClock;
use idvault::idcard::IDCARD;
use idvault::service::Service;
use serde_json::{json, Value};

/// Field names and their SDL output types, written out by hand from the field table
/// and the kind-to-GraphQL mapping.
pub const IDCARD_SDL_FIELDS: [(&str, &str); 29] = [
    ("kind", "ENUM_IDCARD_KIND!"),
    ("identifier", "String!"),
    ("name", "String!"),
    ("birthPlace", "String"),
    ("birthDate", "Date"),
    ("gender", "ENUM_IDCARD_GENDER"),
    ("bloodType", "ENUM_IDCARD_BLOODTYPE"),
    ("address", "String"),
    ("religion", "String"),
    ("marriageStatus", "ENUM_IDCARD_MARRIAGESTATUS"),
    ("occupation", "String"),
    ("nationalityCode", "String"),
    ("expiryDate", "Date"),
    ("facePhoto", "UploadFile"),
    ("cardImage", "UploadFile!"),
    ("personWithCardPhoto", "UploadFile"),
    ("issuerCountryCode", "String"),
    ("issuedDate", "Date"),
    ("faceTop", "Int"),
    ("faceLeft", "Int"),
    ("faceWidth", "Int"),
    ("faceHeight", "Int"),
    ("statusCode", "ENUM_IDCARD_STATUSCODE"),
    ("uploadedAt", "DateTime"),
    ("extractedAt", "DateTime"),
    ("verifiedAt", "DateTime"),
    ("issuerProvince", "String"),
    ("issuerCity", "String"),
    ("uploaderId", "String"),
];

fn block<'a>(sdl: &'a str, header: &str) -> Result<Vec<&'a str>, String> {
    let start = sdl
        .find(header)
        .ok_or_else(|| format!("no `{header}` in SDL"))?;
    Ok(sdl[start + header.len()..]
        .lines()
        .map(str::trim)
        .take_while(|l| *l != "}")
        .filter(|l| !l.is_empty())
        .collect())
}

pub fn check_sdl(sdl: &str) -> Result<(), String> {
    let lines = block(sdl, "type Idcard {")?;
    let fields: Vec<String> = IDCARD_SDL_FIELDS
        .iter()
        .map(|(n, t)| format!("{n}: {t}"))
        .collect();
    let declared: Vec<&str> = lines
        .iter()
        .copied()
        .filter(|l| {
            !l.starts_with("id:") && !l.starts_with("createdAt:") && !l.starts_with("updatedAt:")
        })
        .collect();
    if declared != fields.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(format!("Idcard fields differ:\n{}", declared.join("\n")));
    }
    for (name, values) in [
        (
            "ENUM_IDCARD_KIND",
            &["NATIONAL_ID", "PASSPORT", "DRIVER_LICENSE"][..],
        ),
        ("ENUM_IDCARD_GENDER", &["MALE", "FEMALE"]),
        ("ENUM_IDCARD_BLOODTYPE", &["A", "B", "AB", "O", "UNKNOWN"]),
        (
            "ENUM_IDCARD_MARRIAGESTATUS",
            &["SINGLE", "MARRIED", "DIVORCED", "WIDOWED"],
        ),
        (
            "ENUM_IDCARD_STATUSCODE",
            &["UPLOADED", "EXTRACTED", "VERIFIED", "REJECTED"],
        ),
    ] {
        if block(sdl, &format!("enum {name} {{"))? != values {
            return Err(format!("enum {name} differs"));
        }
    }
    for scalar in ["scalar Date", "scalar DateTime"] {
        if !sdl.lines().any(|l| l == scalar) {
            return Err(format!("missing `{scalar}`"));
        }
    }
    Ok(())
}

const SELECTION: &str =
    "id kind identifier name birthPlace birthDate gender bloodType address religion \
    marriageStatus occupation nationalityCode expiryDate facePhoto { id } cardImage { id } \
    personWithCardPhoto { id } issuerCountryCode issuedDate faceTop faceLeft faceWidth faceHeight \
    statusCode uploadedAt extractedAt verifiedAt issuerProvince issuerCity uploaderId";

fn run(svc: &Service, jwt: &str, query: &str, variables: Value) -> Result<Value, String> {
    let who = svc.authenticate(jwt).map_err(|e| e.to_string())?;
    let variables = if variables.is_null() {
        Default::default()
    } else {
        super::vars(variables)
    };
    let r = svc.execute(query, &variables, None, Some(who));
    if !r.errors.is_empty() {
        return Err(format!("{query}: {:?}", r.errors));
    }
    Ok(r.data.unwrap_or(Value::Null))
}

fn is_datetime(v: &Value) -> bool {
    let re = regex::Regex::new(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z$").unwrap();
    v.as_str().is_some_and(|s| re.is_match(s))
}

/// Creates an idcard with every client-writable field set, reads it back through the API
/// and from a reopened on-disk store, then verifies it and checks the server-written fields.
pub fn round_trip() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut options = super::options(1_000);
    options.data_dir = Some(dir.path().to_path_buf());
    let svc = Service::open(options.clone(), Arc::new(SystemClock)).map_err(|e| e.to_string())?;
    check_sdl(&svc.sdl())?;
    let jwt = super::register(&svc, "fidelity", "pw123456");
    let who = svc.authenticate(&jwt).map_err(|e| e.to_string())?;
    let upload = |w, h| {
        svc.upload(Some(&who), &super::png(w, h), "p.png", "image/png")
            .map(|a| a.id)
    };
    let card = upload(640, 400).map_err(|e| e.to_string())?;
    let face = upload(120, 160).map_err(|e| e.to_string())?;
    let holding = upload(300, 300).map_err(|e| e.to_string())?;

    let input = json!({
        "kind": "NATIONAL_ID",
        "identifier": "3171234567890001",
        "name": "Siti Rahayu",
        "birthPlace": "Bandung",
        "birthDate": "1990-02-28",
        "gender": "FEMALE",
        "bloodType": "AB",
        "address": "Jl. Merdeka No. 10\nRT 001 / RW 002",
        "religion": "Islam",
        "marriageStatus": "MARRIED",
        "occupation": "Engineer",
        "nationalityCode": "IDN",
        "expiryDate": "2030-12-31",
        "facePhoto": {"id": face},
        "cardImage": {"id": card},
        "personWithCardPhoto": {"id": holding},
        "issuerCountryCode": "ID",
        "issuedDate": "2020-01-01",
        "faceTop": 40,
        "faceLeft": 30,
        "faceWidth": 150,
        "faceHeight": 180,
        "issuerProvince": "Jawa Barat",
        "issuerCity": "Bandung"
    });
    let mut create_input = input.clone();
    for media in ["facePhoto", "cardImage", "personWithCardPhoto"] {
        create_input[media] = input[media]["id"].clone();
    }
    let created = run(
        &svc,
        &jwt,
        &format!("mutation($input: createIdcardInput) {{ createIdcard(input: $input) {{ idcard {{ {SELECTION} }} }} }}"),
        json!({"input": create_input}),
    )?;
    let created = created["createIdcard"]["idcard"].clone();
    let id = created["id"].as_str().ok_or("no id")?.to_string();
    let read = |svc: &Service| {
        run(
            svc,
            &jwt,
            &format!("{{ idcard(id: \"{id}\") {{ {SELECTION} }} }}"),
            Value::Null,
        )
        .map(|d| d["idcard"].clone())
    };
    let first = read(&svc)?;
    if first != created {
        return Err(format!(
            "read differs from create echo:\n{first}\n{created}"
        ));
    }
    for (key, expected) in input.as_object().unwrap() {
        if &first[key] != expected {
            return Err(format!("{key}: sent {expected}, read {}", first[key]));
        }
    }
    if first["statusCode"] != "UPLOADED"
        || !is_datetime(&first["uploadedAt"])
        || !first["extractedAt"].is_null()
    {
        return Err(format!("workflow fields after create: {first}"));
    }
    if first["uploaderId"] != json!(who.user_id) {
        return Err(format!(
            "uploaderId {} is not the caller",
            first["uploaderId"]
        ));
    }

    let verified = run(
        &svc,
        &jwt,
        "mutation($id: ID!) { verifyIdcard(id: $id) { idcard { id } } }",
        json!({"id": id}),
    )?;
    if verified["verifyIdcard"]["idcard"]["id"] != json!(id) {
        return Err("verifyIdcard returned another record".into());
    }
    drop(svc);
    let svc = Service::open(options, Arc::new(SystemClock)).map_err(|e| e.to_string())?;
    let after = read(&svc)?;
    let stored = svc
        .content()
        .get_unchecked(IDCARD, &id)
        .map_err(|e| e.to_string())?
        .ok_or("record lost on reopen")?;
    for (key, expected) in input.as_object().unwrap() {
        if &after[key] != expected {
            return Err(format!(
                "{key} changed across verification and restart: {}",
                after[key]
            ));
        }
    }
    if after["statusCode"] != "VERIFIED" {
        return Err(format!("status after verify: {}", after["statusCode"]));
    }
    for key in ["uploadedAt", "extractedAt", "verifiedAt"] {
        if !is_datetime(&after[key]) || after[key] != stored.values[key] {
            return Err(format!(
                "{key}: api {} store {}",
                after[key], stored.values[key]
            ));
        }
    }
    if after["uploadedAt"] != first["uploadedAt"] {
        return Err("uploadedAt rewritten".into());
    }
    Ok(())
}
