//! Generates a few tasks per family, prints their teacher trajectories and
//! scores some hand-written responses.

use adhint::task::{teacher_trajectory, verify, Family, Split, TaskSpace, TokenId, Vocab};

fn show(vocab: &Vocab, toks: &[TokenId]) -> String {
    toks.iter()
        .map(|&t| match t {
            Vocab::BOS => "<s>".to_string(),
            Vocab::EOS => "</s>".to_string(),
            Vocab::ANS_OPEN => "[".to_string(),
            Vocab::ANS_CLOSE => "]".to_string(),
            Vocab::FILLER => ".".to_string(),
            t => vocab.symbol_index(t).map_or(format!("?{t}"), |i| i.to_string()),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> adhint::Result<()> {
    let vocab = Vocab::new(14, 8)?;
    let space = TaskSpace::new(vocab, 8)?;
    for family in Family::ALL {
        println!("{}", family.name());
        for task in space.generate(family, 3, (3, 6), 7, Split::Train)? {
            let entry = teacher_trajectory(&task);
            println!("  query  {}", show(&vocab, &task.query));
            println!("  answer {}", show(&vocab, &task.answer));
            println!("  teacher ({} tokens) {}", entry.teacher_len(), show(&vocab, &entry.teacher_trajectory));
        }
    }

    let task = &space.generate(Family::Reverse, 1, (4, 4), 1, Split::Train)?[0];
    let teacher = teacher_trajectory(task).teacher_trajectory;
    let mut direct = vec![Vocab::ANS_OPEN];
    direct.extend(&task.answer);
    direct.extend([Vocab::ANS_CLOSE, Vocab::EOS]);
    let wrong = [Vocab::ANS_OPEN, Vocab::ANS_CLOSE, Vocab::EOS];
    println!("\nrewards for reverse {}", show(&vocab, &task.query));
    for (name, resp) in [("teacher", teacher.as_slice()), ("direct", &direct), ("empty answer", &wrong)] {
        let r = verify(task, resp);
        println!("  {name:<13} total {:.1} (correct {}, format {})", r.total, r.answer_correct, r.format_ok);
    }
    Ok(())
}
