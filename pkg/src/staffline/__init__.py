"""Timeline-based symbolic score model with MusicXML and MIDI I/O."""

from staffline.errors import (CapacityError, DomainError, IntegrityError,
                              ParseError, StafflineError, StateError,
                              StructureError, UnsupportedFormatError,
                              ValidationError)
from staffline.midi import load_midi, read_midi, save_midi, write_midi
from staffline.musicxml import (MusicXmlSubsetReport, load_musicxml,
                                read_musicxml, save_musicxml, write_musicxml)
from staffline.score import (Divisions, KeySignature, Measure, Note,
                             NoteArrayRow, Part, PartGroup, Rest, Slur, Tempo,
                             TimeLine, TimePoint, TimeSignature, Violation,
                             Words, canonical_form, iter_parts, models_equal)

__version__ = "0.1.0"
