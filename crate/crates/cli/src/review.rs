//! Line-oriented review of temporal swap plans, scriptable from stdin.

use std::io::{BufRead, Write};
use std::sync::Mutex;

use factoid_core::forge::{ForgeError, ReviewDecision, Reviewer, TemporalSwapPlan};

pub struct LineReviewer<'a> {
    input: Mutex<&'a mut (dyn BufRead + Send)>,
    out: Mutex<&'a mut (dyn Write + Send)>,
}

impl<'a> LineReviewer<'a> {
    pub fn new(input: &'a mut (dyn BufRead + Send), out: &'a mut (dyn Write + Send)) -> Self {
        Self {
            input: Mutex::new(input),
            out: Mutex::new(out),
        }
    }
}

fn read_line(input: &mut dyn BufRead) -> Result<Option<String>, ForgeError> {
    let mut line = String::new();
    match input.read_line(&mut line) {
        Ok(0) => Ok(None),
        Ok(_) => Ok(Some(line.trim().to_string())),
        Err(e) => Err(ForgeError::Review(e.to_string())),
    }
}

impl Reviewer for LineReviewer<'_> {
    fn review(&self, plan: &TemporalSwapPlan) -> Result<ReviewDecision, ForgeError> {
        let mut input = self.input.lock().expect("review input poisoned");
        let mut out = self.out.lock().expect("review output poisoned");
        let io = |e: std::io::Error| ForgeError::Review(e.to_string());
        writeln!(
            out,
            "temporal plan: {} ({}) -> {} ({:+} years), replacement: {}",
            plan.anchor_entity, plan.anchor_year, plan.target_year, plan.offset, plan.replacement_entity
        )
        .map_err(io)?;
        loop {
            write!(out, "[a]ccept, [e]dit NAME, [r]eject: ").map_err(io)?;
            out.flush().map_err(io)?;
            let Some(line) = read_line(*input)? else {
                writeln!(out).map_err(io)?;
                return Ok(ReviewDecision::Reject);
            };
            let (cmd, rest) = line.split_once(char::is_whitespace).unwrap_or((&line, ""));
            match cmd {
                "a" | "accept" => return Ok(ReviewDecision::Accept),
                "r" | "reject" => return Ok(ReviewDecision::Reject),
                "e" | "edit" => {
                    let mut name = rest.trim().to_string();
                    while name.is_empty() || name == plan.anchor_entity {
                        if !name.is_empty() {
                            writeln!(out, "replacement must differ from the anchor").map_err(io)?;
                        }
                        write!(out, "replacement: ").map_err(io)?;
                        out.flush().map_err(io)?;
                        match read_line(*input)? {
                            Some(l) => name = l,
                            None => return Ok(ReviewDecision::Reject),
                        }
                    }
                    return Ok(ReviewDecision::Edit(name));
                }
                _ => writeln!(out, "unrecognised answer `{line}`").map_err(io)?,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use factoid_core::forge::ReviewState;
    use factoid_core::corpus::TextSpan;

    fn plan() -> TemporalSwapPlan {
        TemporalSwapPlan {
            anchor_entity: "Barack Obama".into(),
            anchor_span: TextSpan::at(0, "Barack Obama"),
            anchor_year: 1996,
            offset: 150,
            target_year: 1846,
            role_question: "Who held the role of Barack Obama in 1846?".into(),
            replacement_entity: "James K. Polk".into(),
            review_state: ReviewState::Pending,
        }
    }

    fn decide(script: &str) -> ReviewDecision {
        let mut input: &[u8] = script.as_bytes();
        let mut out = Vec::new();
        let r = LineReviewer::new(&mut input, &mut out);
        r.review(&plan()).unwrap()
    }

    #[test]
    fn keystrokes() {
        assert_eq!(decide("a\n"), ReviewDecision::Accept);
        assert_eq!(decide("r\n"), ReviewDecision::Reject);
        assert_eq!(decide(""), ReviewDecision::Reject);
        assert_eq!(decide("x\na\n"), ReviewDecision::Accept);
        assert_eq!(decide("e Thomas Jefferson\n"), ReviewDecision::Edit("Thomas Jefferson".into()));
        assert_eq!(decide("e\n\nBarack Obama\nJohn Tyler\n"), ReviewDecision::Edit("John Tyler".into()));
        assert_eq!(decide("e\n"), ReviewDecision::Reject);
    }
}
