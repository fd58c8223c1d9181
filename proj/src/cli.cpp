// placeholder; implementation follows
