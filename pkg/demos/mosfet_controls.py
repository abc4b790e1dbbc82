"""How controls of a MOSFET model are checked and rewritten.

The drain-source current of the model is a controlled current source that
reads three terminal voltages.  Each control has to be expressible through
branch voltages of capacitors, resistors and voltage sources, and the source
itself must sit on a capacitor path.  Removing the gate-source capacitor
breaks that and verification says which rule fails.

Run:  python demos/mosfet_controls.py
"""

from importlib import resources

from mnadec import assemble, load_netlist, parse_netlist, verify_circuit


def report(title, circuit):
    r = verify_circuit(circuit)
    print(f"== {title}: {'accepted' if r.passed else 'rejected'}")
    for eid, k in r.ic_type_of.items():
        print(f"   {eid} is a type-{k} controlled current source")
    for key, path in r.control_rewrites.items():
        expr = " ".join(f"{'+' if s > 0 else '-'}v({bid})" for bid, s in path)
        print(f"   {key:<16} = {expr}")
    for v in r.violations:
        print(f"   {v.code}: {v.message}")
    return r


def main():
    text = (resources.files("mnadec") / "data" / "mosfet_model.net").read_text()
    circuit = parse_netlist(text)
    report("MOSFET model", circuit)
    system = assemble(circuit)
    print("   differential variables:", list(system.partition.x_names))
    print()

    # without CGS and CGD, drain and source are joined only through resistors
    stripped = "\n".join(ln for ln in text.splitlines()
                         if not ln.startswith(("CGS", "CGD"))) + "\n"
    report("without gate capacitances", parse_netlist(stripped))
    print()

    report("MOSFET buck converter",
           load_netlist(resources.files("mnadec") / "data" / "mosfet_buck.net"))


if __name__ == "__main__":
    main()
