use crate::error::{Error, Result};
use crate::trace::{CommandStream, Parity, PimCommand, Scope};

fn touches(c: &PimCommand, p: Parity) -> bool {
    match c.scope {
        Scope::AllBank => true,
        Scope::EvenBanks => p == Parity::Even,
        Scope::OddBanks => p == Parity::Odd,
        Scope::SingleBank(b) => (b % 2 == 0) == (p == Parity::Even),
    }
}

/// Splits every all-bank ACT into an even and an odd ACT and moves each up
/// to just after the last earlier command touching that parity. An ACT
/// stays whole when the parity the next command needs cannot move up. Commands
/// touching a given bank keep their order, so only the cross-parity
/// interleaving changes.
pub fn arch_aware_activation(stream: &CommandStream) -> Result<CommandStream> {
    if let Some(i) = stream
        .commands
        .iter()
        .position(|c| c.is_multibank_compute() && c.scope == Scope::AllBank)
    {
        return Err(Error::MissingParityTags(i));
    }
    // sort key: (index of the command it follows, creation order)
    let mut keyed: Vec<((usize, usize), PimCommand)> = Vec::with_capacity(stream.len() + stream.len() / 8);
    let mut last: [Option<(usize, usize)>; 2] = [None, None];
    let mut seq = 1;
    let parities = [Parity::Even, Parity::Odd];
    for (i, c) in stream.commands.iter().enumerate() {
        // splitting costs a slot; it only pays when the parity needed next
        // can start its activation early
        let hoists = |pi: usize| last[pi].is_some_and(|(base, _)| base + 1 < i);
        let needed = stream.commands.get(i + 1).map(|n| [touches(n, Parity::Even), touches(n, Parity::Odd)]);
        let pays = needed.is_some_and(|nd| (0..2).all(|pi| !nd[pi] || hoists(pi)));
        if c.is_act() && c.scope == Scope::AllBank && pays {
            for (pi, &p) in parities.iter().enumerate() {
                // nothing earlier touches this parity: keep the original slot
                let key = (last[pi].map_or(i, |(base, _)| base), seq);
                seq += 1;
                keyed.push((key, PimCommand::act(Scope::of_parity(p), c.row)));
                last[pi] = Some(key);
            }
            continue;
        }
        let key = (i, 0);
        keyed.push((key, *c));
        for (pi, &p) in parities.iter().enumerate() {
            if touches(c, p) {
                last[pi] = Some(key);
            }
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    let mut commands: Vec<PimCommand> = keyed.into_iter().map(|(_, c)| c).collect();
    commands.shrink_to_fit();
    Ok(CommandStream::with_commands(stream.meta.clone(), commands))
}
