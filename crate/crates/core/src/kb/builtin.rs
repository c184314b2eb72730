use super::identifier::{Identifier, Validator};

pub const CREDIT_CARD: &str = "CREDIT_CARD";
pub const SSN: &str = "SSN";
pub const EMAIL: &str = "EMAIL";
pub const PHONE_US: &str = "PHONE_US";
pub const IPV4: &str = "IPV4";
pub const ZIPCODE: &str = "ZIPCODE";
pub const GENDER: &str = "GENDER";
pub const PERSON_NAME: &str = "PERSON_NAME";

/// Entity types of the built-in identifiers, alphabetical.
pub const BUILTIN_ENTITIES: [&str; 8] = [
    CREDIT_CARD,
    EMAIL,
    GENDER,
    IPV4,
    PERSON_NAME,
    PHONE_US,
    SSN,
    ZIPCODE,
];

pub const GENDER_TERMS: &[&str] = &[
    "male",
    "female",
    "m",
    "f",
    "nonbinary",
    "non-binary",
    "transgender",
];

/// Bundled first-name list for the PERSON_NAME dictionary. Words that double
/// as common English vocabulary are left out.
pub const PERSON_NAMES: &[&str] = &[
    "aaron", "abigail", "adam", "albert", "alexander", "alexis", "alice", "alan", "amanda",
    "andrea", "andrew", "angela", "ann", "anna", "anthony", "arthur", "ashley", "austin",
    "barbara", "benjamin", "betty", "beverly", "brandon", "brenda", "brian", "brittany", "bruce",
    "bryan", "catherine", "charles", "charlotte", "cheryl", "christian", "christina", "christine",
    "christopher", "cynthia", "daniel", "danielle", "david", "deborah", "debra", "denise",
    "dennis", "diana", "diane", "donald", "donna", "doris", "dorothy", "douglas", "dylan",
    "edward", "elijah", "elizabeth", "emily", "emma", "eric", "ethan", "eugene", "evelyn",
    "frances", "gabriel", "gary", "george", "gerald", "gloria", "gregory", "hannah", "harold",
    "heather", "helen", "henry", "isabella", "jacob", "jacqueline", "james", "janet", "janice",
    "jason", "jeffrey", "jennifer", "jeremy", "jerry", "jesse", "jessica", "john", "jonathan",
    "jose", "joseph", "joshua", "joyce", "juan", "judith", "julia", "julie", "justin", "karen",
    "katherine", "kathleen", "kathryn", "kayla", "keith", "kelly", "kenneth", "kevin", "kimberly",
    "kyle", "larry", "laura", "lauren", "lawrence", "linda", "lisa", "logan", "lori", "louis",
    "madison", "margaret", "maria", "marie", "marilyn", "martha", "mary", "mason", "matthew",
    "megan", "melissa", "michael", "michelle", "nancy", "natalie", "nathan", "nicholas", "nicole",
    "noah", "olivia", "pamela", "patricia", "patrick", "paul", "peter", "philip", "rachel",
    "ralph", "randy", "raymond", "rebecca", "richard", "robert", "ronald", "russell", "ruth",
    "ryan", "samantha", "samuel", "sandra", "sara", "sarah", "scott", "sean", "sharon", "shirley",
    "sophia", "stephanie", "stephen", "steven", "susan", "teresa", "theresa", "thomas", "timothy",
    "tyler", "victoria", "vincent", "virginia", "walter", "wayne", "william", "willie", "zachary",
];

fn build(name: &str) -> Identifier {
    let id = match name {
        CREDIT_CARD => Identifier::regex(CREDIT_CARD, r"[0-9](?:-?[0-9]){12,18}", Some(Validator::Luhn), 13, 37),
        SSN => Identifier::regex(SSN, r"[0-9]{3}-[0-9]{2}-[0-9]{4}", Some(Validator::SsnArea), 11, 11),
        EMAIL => Identifier::regex(
            EMAIL,
            r"[A-Za-z0-9._+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}",
            None,
            6,
            254,
        ),
        PHONE_US => Identifier::regex(
            PHONE_US,
            r"(?:\+?1[-.])?[2-9][0-9]{2}[-.][2-9][0-9]{2}[-.][0-9]{4}",
            None,
            12,
            15,
        ),
        IPV4 => Identifier::regex(
            IPV4,
            r"[0-9]{1,3}\.[0-9]{1,3}\.[0-9]{1,3}\.[0-9]{1,3}",
            Some(Validator::Ipv4Octets),
            7,
            15,
        ),
        ZIPCODE => Identifier::regex(ZIPCODE, r"[0-9]{5}", None, 5, 5),
        GENDER => Identifier::dictionary(GENDER, GENDER_TERMS),
        PERSON_NAME => Identifier::dictionary(PERSON_NAME, PERSON_NAMES),
        other => unreachable!("no built-in identifier named {other}"),
    };
    id.expect("built-in identifier definitions are valid")
}

/// The built-in identifier inventory, alphabetical by entity type.
pub fn load_builtin_identifiers() -> Vec<Identifier> {
    BUILTIN_ENTITIES.iter().map(|n| build(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn inventory() {
        let ids = load_builtin_identifiers();
        let names: HashSet<_> = ids.iter().map(|i| i.name()).collect();
        assert_eq!(names.len(), ids.len());
        assert!(names.contains(CREDIT_CARD) && names.contains(EMAIL));
        assert_eq!(ids.len(), 8);
    }

    #[test]
    fn samples() {
        let ids = load_builtin_identifiers();
        let get = |n: &str| ids.iter().find(|i| i.name() == n).unwrap();
        assert!(get(CREDIT_CARD).matches(b"4539578763621486"));
        assert!(get(CREDIT_CARD).matches(b"4539-5787-6362-1486"));
        assert!(!get(CREDIT_CARD).matches(b"4539578763621487"));
        assert!(get(SSN).matches(b"123-45-6789"));
        assert!(!get(SSN).matches(b"666-45-6789"));
        assert!(get(EMAIL).matches(b"alice@example.com"));
        assert!(!get(EMAIL).matches(b"alice@example"));
        assert!(get(PHONE_US).matches(b"206-555-0142"));
        assert!(get(IPV4).matches(b"192.168.0.1"));
        assert!(!get(IPV4).matches(b"300.1.1.1"));
        assert!(get(ZIPCODE).matches(b"98112"));
        assert!(get(GENDER).matches(b"Female"));
        assert!(get(PERSON_NAME).matches(b"Alice"));
    }

    #[test]
    fn names_and_gender_terms_do_not_overlap() {
        let names: HashSet<_> = PERSON_NAMES.iter().collect();
        assert_eq!(names.len(), PERSON_NAMES.len());
        assert!(GENDER_TERMS.iter().all(|g| !names.contains(g)));
    }
}
